#include "gravtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gravtrack/error.hpp"
#include "gravtrack/morphology.hpp"

namespace gravtrack {

namespace {

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool empty() const { return x1 < x0; }
  void add(int x, int y) {
    if (empty()) {
      x0 = x1 = x;
      y0 = y1 = y;
      return;
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void add(const Box& b) {
    if (b.empty()) return;
    add(b.x0, b.y0);
    add(b.x1, b.y1);
  }
};

Box bounding_box(const Mask& m) {
  Box b;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y)) b.add(x, y);
    }
  }
  return b;
}

Vec2 centroid(const Mask& m) {
  Vec2 c;
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      c += Vec2{static_cast<double>(x), static_cast<double>(y)};
      ++n;
    }
  }
  return n ? c * (1.0 / static_cast<double>(n)) : c;
}

Mask window_of(const Mask& m, const Box& b) {
  Mask out(b.x1 - b.x0 + 1, b.y1 - b.y0 + 1);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out(x, y) = m(b.x0 + x, b.y0 + y);
  }
  return out;
}

// Largest 4-connected component; ties go to the first in row-major order.
Mask largest_component(const Mask& m) {
  const LabelMap cc = connected_components(m, Connectivity::four);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(max_label(cc)) + 1, 0);
  for (std::size_t i = 0; i < cc.size(); ++i) ++sizes[static_cast<std::size_t>(cc[i])];
  std::size_t best = 0;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    if (best == 0 || sizes[k] > sizes[best]) best = k;
  }
  Mask out(m.width(), m.height());
  if (best == 0) return out;
  for (std::size_t i = 0; i < cc.size(); ++i) out[i] = static_cast<std::size_t>(cc[i]) == best;
  return out;
}

Mask background_of(const LabelMap& labels) {
  Mask out(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == 0;
  return out;
}

// Appends `mask` as a new recovered cell; returns its id.
std::int32_t add_cell(TrackingFrame& frame, const Mask& mask) {
  const auto id = static_cast<std::int32_t>(frame.cells.stats.size() + 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) frame.cells.labels[i] = id;
  }
  CellStats s = measure_cell(mask, frame.enhanced);
  s.recovered = true;
  frame.cells.stats.push_back(s);
  return id;
}

Mask cell_mask(const TrackingFrame& frame, std::int32_t id) { return mask_of(frame.cells.labels, id); }

}  // namespace

void validate(const TrackParams& p) {
  if (!(p.match_min_fraction > 0.0 && p.match_min_fraction <= 1.0)) {
    throw ParameterError("track match_min_fraction must lie in (0, 1]");
  }
  if (!(p.contrast_accept_ratio >= 0.0)) {
    throw ParameterError("track contrast_accept_ratio must be >= 0");
  }
  if (!(p.filter_lower >= 0.0) || !(p.filter_upper >= p.filter_lower)) {
    throw ParameterError("track filter bounds must satisfy 0 <= lower <= upper");
  }
  if (p.max_recovery_chain < 0) throw ParameterError("track max_recovery_chain must be >= 0");
}

std::vector<TrackRecord> TrackGraph::records() const {
  std::vector<TrackRecord> out;
  out.reserve(tracklets.size());
  for (const Tracklet& t : tracklets) out.push_back({t.label, t.begin, t.end, t.parent});
  return out;
}

InstanceBasinMap merge_basins(const BasinMap& basins, const CellMaskSet& cells) {
  if (!basins.labels.same_shape(cells.labels)) throw DataError("basin and cell maps differ in size");
  std::vector<std::int32_t> owner(basins.minima.size() + 1, 0);
  for (std::size_t k = 0; k < basins.minima.size(); ++k) {
    const Vec2 m = clamp_to_domain(basins.minima[k], cells.labels.width(), cells.labels.height());
    owner[k + 1] = cells.labels(static_cast<int>(std::lround(m.x)), static_cast<int>(std::lround(m.y)));
  }
  InstanceBasinMap out{LabelMap(basins.labels.width(), basins.labels.height())};
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const std::int32_t cell = cells.labels[i];
    const std::int32_t b = basins.labels[i];
    out.labels[i] = cell > 0 ? cell : (b > 0 ? owner[static_cast<std::size_t>(b)] : 0);
  }
  return out;
}

FrameMatching associate(const CellMaskSet& cells_t, const InstanceBasinMap& other,
                        double min_fraction) {
  if (!cells_t.labels.same_shape(other.labels)) throw DataError("frames differ in size");
  const std::size_t n = cells_t.stats.size();
  std::vector<std::map<std::int32_t, std::size_t>> tally(n);
  std::vector<std::size_t> area(n, 0);
  for (std::size_t i = 0; i < cells_t.labels.size(); ++i) {
    const std::int32_t c = cells_t.labels[i];
    if (c <= 0) continue;
    const auto ci = static_cast<std::size_t>(c - 1);
    ++area[ci];
    if (other.labels[i] > 0) ++tally[ci][other.labels[i]];
  }
  FrameMatching m;
  m.best.assign(n, 0);
  m.best_fraction.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (const auto& [target, votes] : tally[c]) {
      const double f = static_cast<double>(votes) / static_cast<double>(area[c]);
      m.votes.push_back({static_cast<std::int32_t>(c + 1), target, f});
      if (f > m.best_fraction[c]) {
        m.best_fraction[c] = f;
        m.best[c] = target;
      }
    }
    if (m.best_fraction[c] < min_fraction) m.best[c] = 0;
  }
  return m;
}

std::optional<Mask> recover_missing(const Mask& prev_mask, const Image2D& frame,
                                    double ref_contrast, const SegParams& p,
                                    double accept_ratio, const Mask* allowed) {
  const RefineResult r = chan_vese_refine(frame, prev_mask, p, allowed);
  if (r.collapsed || count(r.mask) == 0) return std::nullopt;
  if (allowed != nullptr) {
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
      if (r.mask[i] && !(*allowed)[i]) return std::nullopt;
    }
  }
  if (ref_contrast <= 0.0) return r.mask;
  const double c = measure_cell(r.mask, frame).contrast();
  if (c < accept_ratio * ref_contrast) return std::nullopt;
  return r.mask;
}

Mask interpolate_gap(const Mask& mask_before, const Mask& mask_after) {
  if (!mask_before.same_shape(mask_after)) throw DataError("gap masks differ in size");
  const int w = mask_before.width();
  const int h = mask_before.height();
  Mask out(w, h);
  const Box b1 = bounding_box(mask_before);
  const Box b2 = bounding_box(mask_after);
  if (b1.empty() && b2.empty()) return out;
  if (b1.empty() || b2.empty() || b1.x1 < b2.x0 || b2.x1 < b1.x0 || b1.y1 < b2.y0 ||
      b2.y1 < b1.y0) {
    const std::size_t n1 = count(mask_before);
    const std::size_t n2 = count(mask_after);
    const Mask& small = (n1 != 0 && (n2 == 0 || n1 <= n2)) ? mask_before : mask_after;
    Vec2 target = centroid(small);
    if (n1 != 0 && n2 != 0) target = (centroid(mask_before) + centroid(mask_after)) * 0.5;
    const Vec2 c = centroid(small);
    const int dx = static_cast<int>(std::lround(target.x - c.x));
    const int dy = static_cast<int>(std::lround(target.y - c.y));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (small(x, y) && out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
      }
    }
    return out;
  }
  Box win = b1;
  win.add(b2);
  win = {std::max(0, win.x0 - 2), std::max(0, win.y0 - 2), std::min(w - 1, win.x1 + 2),
         std::min(h - 1, win.y1 + 2)};
  const Image2D d1 = signed_distance(window_of(mask_before, win));
  const Image2D d2 = signed_distance(window_of(mask_after, win));
  for (int y = 0; y < d1.height(); ++y) {
    for (int x = 0; x < d1.width(); ++x) {
      out(win.x0 + x, win.y0 + y) = 0.5 * (d1(x, y) + d2(x, y)) >= 0.0;
    }
  }
  return out;
}

TrackGraph track_sequence(std::vector<TrackingFrame>& frames, const TrackParams& tp,
                          const SegParams& sp, TrackingStats* stats) {
  validate(tp);
  TrackingStats local_stats;
  TrackingStats& st = stats ? *stats : local_stats;
  st = {};
  const int T = static_cast<int>(frames.size());
  TrackGraph graph;
  if (T == 0) return graph;
  for (const TrackingFrame& f : frames) {
    if (!f.cells.labels.same_shape(frames[0].cells.labels) || !f.enhanced.same_shape(f.cells.labels)) {
      throw DataError("tracking frames differ in size");
    }
  }

  std::vector<InstanceBasinMap> inst(static_cast<std::size_t>(T));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < T; ++t) {
    inst[static_cast<std::size_t>(t)] = merge_basins(frames[static_cast<std::size_t>(t)].basins,
                                                     frames[static_cast<std::size_t>(t)].cells);
  }
  auto back_match = [&](int t) {
    return associate(frames[static_cast<std::size_t>(t)].cells,
                     inst[static_cast<std::size_t>(t - 1)], tp.match_min_fraction);
  };
  auto fwd_match = [&](int t, int dt) {
    return associate(frames[static_cast<std::size_t>(t)].cells,
                     inst[static_cast<std::size_t>(t + dt)], tp.match_min_fraction);
  };

  // Backward pass.
  std::vector<FrameMatching> back(static_cast<std::size_t>(T));
#pragma omp parallel for schedule(dynamic)
  for (int t = 1; t < T; ++t) back[static_cast<std::size_t>(t)] = back_match(t);

  // Forward pass with gap interpolation and recovery. Recovered cells remember the
  // contrast of the detection they continue and how many frames they bridge.
  std::vector<std::vector<double>> ref(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> chain(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    for (const CellStats& s : frames[static_cast<std::size_t>(t)].cells.stats) {
      ref[static_cast<std::size_t>(t)].push_back(s.contrast());
      chain[static_cast<std::size_t>(t)].push_back(0);
    }
  }
  for (int t = 0; t + 1 < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    TrackingFrame& next = frames[ti + 1];
    const FrameMatching fm = fwd_match(t, 1);
    std::vector<std::int32_t> unmatched;
    for (std::size_t c = 0; c < fm.best.size(); ++c) {
      if (fm.best[c] == 0) unmatched.push_back(static_cast<std::int32_t>(c + 1));
    }
    if (unmatched.empty()) continue;

    FrameMatching skip, after_back;
    if (t + 2 < T) {
      skip = fwd_match(t, 2);
      after_back = back_match(t + 2);
    }
    bool changed = false;
    for (const std::int32_t c : unmatched) {
      const auto ci = static_cast<std::size_t>(c - 1);
      const Mask prev = cell_mask(frames[ti], c);
      if (t + 2 < T && skip.best[ci] > 0 &&
          after_back.best[static_cast<std::size_t>(skip.best[ci] - 1)] == 0) {
        const Mask after = cell_mask(frames[ti + 2], skip.best[ci]);
        Mask gap = interpolate_gap(prev, after);
        for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = gap[i] && next.cells.labels[i] == 0;
        gap = largest_component(gap);
        if (count(gap) >= static_cast<std::size_t>(sp.min_cell_area)) {
          add_cell(next, gap);
          ref[ti + 1].push_back(ref[ti][ci]);
          chain[ti + 1].push_back(chain[ti][ci] + 1);
          ++st.interpolated;
          changed = true;
          continue;
        }
      }
      if (chain[ti][ci] >= tp.max_recovery_chain) continue;
      const Mask allowed = background_of(next.cells.labels);
      const std::optional<Mask> rec =
          recover_missing(prev, next.enhanced, ref[ti][ci], sp, tp.contrast_accept_ratio, &allowed);
      if (!rec || count(*rec) < static_cast<std::size_t>(sp.min_cell_area)) continue;
      add_cell(next, *rec);
      ref[ti + 1].push_back(ref[ti][ci]);
      chain[ti + 1].push_back(chain[ti][ci] + 1);
      ++st.recovered;
      changed = true;
    }
    if (changed) inst[ti + 1] = merge_basins(next.basins, next.cells);
  }

  // Associations against the final cell sets.
  std::vector<FrameMatching> fwd(static_cast<std::size_t>(T));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < T; ++t) {
    if (t > 0) back[static_cast<std::size_t>(t)] = back_match(t);
    if (t + 1 < T) fwd[static_cast<std::size_t>(t)] = fwd_match(t, 1);
  }

  // link[t][c - 1]: cell at t - 1 continued by cell c at t.
  std::vector<std::vector<std::int32_t>> link(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> children(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    link[ti].assign(frames[ti].cells.stats.size(), 0);
    children[ti].assign(frames[ti].cells.stats.size(), 0);
  }
  for (int t = 1; t < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    for (std::size_t c = 0; c < link[ti].size(); ++c) {
      link[ti][c] = back[ti].best[c];
      if (link[ti][c] > 0) ++children[ti - 1][static_cast<std::size_t>(link[ti][c] - 1)];
    }
    const FrameMatching& fm = fwd[ti - 1];
    // A split needs the parent to vote for each branch too; branches it does not
    // see start unparented tracklets (the strongest one is always kept).
    std::map<std::pair<std::int32_t, std::int32_t>, double> forward_vote;
    for (const Match& m : fm.votes) forward_vote[{m.source, m.target}] = m.fraction;
    for (std::size_t p = 0; p < children[ti - 1].size(); ++p) {
      if (children[ti - 1][p] < 2) continue;
      const auto parent = static_cast<std::int32_t>(p + 1);
      std::size_t strongest = link[ti].size();
      for (std::size_t c = 0; c < link[ti].size(); ++c) {
        if (link[ti][c] != parent) continue;
        if (strongest == link[ti].size() || back[ti].best_fraction[c] > back[ti].best_fraction[strongest]) {
          strongest = c;
        }
      }
      for (std::size_t c = 0; c < link[ti].size(); ++c) {
        if (link[ti][c] != parent || c == strongest) continue;
        const auto it = forward_vote.find({parent, static_cast<std::int32_t>(c + 1)});
        if (it == forward_vote.end() || it->second < tp.match_min_fraction) {
          link[ti][c] = 0;
          --children[ti - 1][p];
        }
      }
    }
    // Cells without a backward match may still be the forward choice of a cell
    // that has no other continuation.
    for (std::size_t p = 0; p < fm.best.size(); ++p) {
      const std::int32_t c = fm.best[p];
      if (c <= 0 || children[ti - 1][p] != 0) continue;
      const auto cc = static_cast<std::size_t>(c - 1);
      if (link[ti][cc] != 0) continue;
      link[ti][cc] = static_cast<std::int32_t>(p + 1);
      ++children[ti - 1][p];
    }
  }

  // Linking pass in reverse time.
  std::vector<std::vector<std::int32_t>> owner(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) owner[static_cast<std::size_t>(t)].assign(link[static_cast<std::size_t>(t)].size(), 0);
  struct Pending {
    Tracklet tracklet;
    int parent_frame = -1;
    std::int32_t parent_cell = 0;
  };
  std::vector<Pending> built;
  for (int t = T - 1; t >= 0; --t) {
    for (std::size_t c0 = 0; c0 < owner[static_cast<std::size_t>(t)].size(); ++c0) {
      if (owner[static_cast<std::size_t>(t)][c0] != 0) continue;
      Pending pend;
      const auto id = static_cast<std::int32_t>(built.size() + 1);
      std::vector<std::int32_t> rev;
      int frame = t;
      auto cell = static_cast<std::int32_t>(c0 + 1);
      while (true) {
        const auto fi = static_cast<std::size_t>(frame);
        const auto ci = static_cast<std::size_t>(cell - 1);
        owner[fi][ci] = id;
        rev.push_back(cell);
        if (frame == 0) break;
        const std::int32_t p = link[fi][ci];
        if (p == 0) break;
        if (children[fi - 1][static_cast<std::size_t>(p - 1)] >= 2) {
          pend.parent_frame = frame - 1;
          pend.parent_cell = p;
          break;
        }
        --frame;
        cell = p;
      }
      pend.tracklet.begin = frame;
      pend.tracklet.end = t;
      pend.tracklet.cells.assign(rev.rbegin(), rev.rend());
      built.push_back(std::move(pend));
    }
  }

  // Labels follow (begin frame, first cell id).
  std::vector<std::size_t> order(built.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Tracklet& ta = built[a].tracklet;
    const Tracklet& tb = built[b].tracklet;
    if (ta.begin != tb.begin) return ta.begin < tb.begin;
    return ta.cells.front() < tb.cells.front();
  });
  std::vector<std::int32_t> label_of(built.size() + 1, 0);
  for (std::size_t r = 0; r < order.size(); ++r) label_of[order[r] + 1] = static_cast<std::int32_t>(r + 1);

  std::vector<std::int32_t> parents_seen;
  for (const std::size_t i : order) {
    Pending& pend = built[i];
    Tracklet tr = std::move(pend.tracklet);
    tr.label = label_of[i + 1];
    if (pend.parent_frame >= 0) {
      const auto pf = static_cast<std::size_t>(pend.parent_frame);
      tr.parent = label_of[static_cast<std::size_t>(owner[pf][static_cast<std::size_t>(pend.parent_cell - 1)])];
      parents_seen.push_back(tr.parent);
    }
    for (std::size_t k = 0; k < tr.cells.size(); ++k) {
      const CellStats& s = frames[static_cast<std::size_t>(tr.begin) + k]
                               .cells.stats[static_cast<std::size_t>(tr.cells[k] - 1)];
      tr.areas.push_back(s.area);
      tr.contrasts.push_back(s.contrast());
    }
    graph.tracklets.push_back(std::move(tr));
  }
  std::sort(parents_seen.begin(), parents_seen.end());
  st.mitoses = static_cast<std::size_t>(
      std::unique(parents_seen.begin(), parents_seen.end()) - parents_seen.begin());
  return graph;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

bool keep_tracklet(const std::vector<std::size_t>& areas, const std::vector<double>& contrasts,
                   double lower, double upper, double min_contrast) {
  if (areas.empty()) return false;
  bool any_large = false;
  for (const std::size_t a : areas) {
    const auto da = static_cast<double>(a);
    if (da < lower) return false;
    if (da >= upper) any_large = true;
  }
  return any_large && median(contrasts) >= min_contrast;
}

TrackGraph filter_tracklets(const TrackGraph& g, double lower, double upper, double min_contrast) {
  if (!(lower <= upper)) throw ParameterError("filter lower bound exceeds upper bound");
  std::map<std::int32_t, Tracklet> kept;
  for (const Tracklet& t : g.tracklets) {
    if (keep_tracklet(t.areas, t.contrasts, lower, upper, min_contrast)) kept.emplace(t.label, t);
  }
  for (auto& [label, t] : kept) {
    if (t.parent != 0 && !kept.contains(t.parent)) t.parent = 0;
  }

  // Join a parent with its only surviving child.
  bool joined = true;
  while (joined) {
    joined = false;
    for (auto& [label, parent] : kept) {
      std::vector<std::int32_t> kids;
      for (const auto& [cl, c] : kept) {
        if (c.parent == label) kids.push_back(cl);
      }
      if (kids.size() != 1) continue;
      const Tracklet& child = kept.at(kids.front());
      Tracklet merged = parent;
      merged.end = child.end;
      merged.cells.insert(merged.cells.end(), child.cells.begin(), child.cells.end());
      merged.areas.insert(merged.areas.end(), child.areas.begin(), child.areas.end());
      merged.contrasts.insert(merged.contrasts.end(), child.contrasts.begin(), child.contrasts.end());
      if (!keep_tracklet(merged.areas, merged.contrasts, lower, upper, min_contrast)) continue;
      const std::int32_t child_label = child.label;
      parent = std::move(merged);
      kept.erase(child_label);
      for (auto& [cl, c] : kept) {
        if (c.parent == child_label) c.parent = label;
      }
      joined = true;
      break;
    }
  }

  TrackGraph out;
  std::map<std::int32_t, std::int32_t> relabel;
  for (const auto& [label, t] : kept) relabel[label] = static_cast<std::int32_t>(relabel.size() + 1);
  for (const auto& [label, t] : kept) {
    Tracklet r = t;
    r.label = relabel.at(label);
    r.parent = t.parent ? relabel.at(t.parent) : 0;
    out.tracklets.push_back(std::move(r));
  }
  return out;
}

std::vector<LabelMap> render_tracks(const TrackGraph& g, const std::vector<TrackingFrame>& frames) {
  std::vector<std::vector<std::int32_t>> lut(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) lut[t].assign(frames[t].cells.stats.size() + 1, 0);
  for (const Tracklet& tr : g.tracklets) {
    for (std::size_t k = 0; k < tr.cells.size(); ++k) {
      const std::size_t t = static_cast<std::size_t>(tr.begin) + k;
      if (t >= frames.size()) throw DataError("tracklet extends past the sequence");
      lut[t].at(static_cast<std::size_t>(tr.cells[k])) = tr.label;
    }
  }
  std::vector<LabelMap> out(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const LabelMap& cells = frames[t].cells.labels;
    out[t] = LabelMap(cells.width(), cells.height());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out[t][i] = cells[i] > 0 ? lut[t][static_cast<std::size_t>(cells[i])] : 0;
    }
  }
  return out;
}

}  // namespace gravtrack
