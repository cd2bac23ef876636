#include "gravtrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "gravtrack/error.hpp"
#include "gravtrack/io.hpp"

namespace gravtrack {

namespace fs = std::filesystem;

namespace {

struct Region {
  Vec2 sum;
  std::size_t area = 0;

  Vec2 centroid() const { return sum * (1.0 / static_cast<double>(area)); }
};

std::map<std::int32_t, Region> regions(const LabelMap& labels) {
  std::map<std::int32_t, Region> out;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const std::int32_t l = labels(x, y);
      if (l <= 0) continue;
      Region& r = out[l];
      r.sum += Vec2{static_cast<double>(x), static_cast<double>(y)};
      ++r.area;
    }
  }
  return out;
}

std::int32_t label_at(const LabelMap& labels, Vec2 p) {
  const int x = static_cast<int>(std::lround(p.x));
  const int y = static_cast<int>(std::lround(p.y));
  return labels.contains(x, y) ? labels(x, y) : 0;
}

// gt label -> pred label for one frame.
std::map<std::int32_t, std::int32_t> match_frame(const LabelMap& pred, const LabelMap& gt,
                                                 std::size_t& n_pred, std::size_t& n_gt) {
  const auto rp = regions(pred);
  const auto rg = regions(gt);
  n_pred = rp.size();
  n_gt = rg.size();
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> overlap;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 0 && gt[i] > 0) ++overlap[{pred[i], gt[i]}];
  }
  struct Candidate {
    double iou;
    std::int32_t p, g;
  };
  std::set<std::pair<std::int32_t, std::int32_t>> pairs;
  for (const auto& [p, r] : rp) {
    const std::int32_t g = label_at(gt, r.centroid());
    if (g > 0) pairs.insert({p, g});
  }
  for (const auto& [g, r] : rg) {
    const std::int32_t p = label_at(pred, r.centroid());
    if (p > 0) pairs.insert({p, g});
  }
  std::vector<Candidate> cands;
  for (const auto& [p, g] : pairs) {
    const auto it = overlap.find({p, g});
    const double inter = it == overlap.end() ? 0.0 : static_cast<double>(it->second);
    const double uni = static_cast<double>(rp.at(p).area + rg.at(g).area) - inter;
    cands.push_back({inter / uni, p, g});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.iou > b.iou; });
  std::set<std::int32_t> used_p, used_g;
  std::map<std::int32_t, std::int32_t> out;
  for (const Candidate& c : cands) {
    if (used_p.contains(c.p) || used_g.contains(c.g)) continue;
    used_p.insert(c.p);
    used_g.insert(c.g);
    out[c.g] = c.p;
  }
  return out;
}

std::vector<fs::path> mask_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::pair<long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string stem = entry.path().stem().string();
    if (entry.path().extension() != ".tif" || stem.rfind("mask", 0) != 0 || stem.size() == 4) continue;
    const std::string digits = stem.substr(4);
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    found.emplace_back(std::stol(digits), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [n, p] : found) out.push_back(std::move(p));
  return out;
}

}  // namespace

EvalReport evaluate(const std::vector<LabelMap>& pred, const std::vector<TrackRecord>& pred_tracks,
                    const std::vector<LabelMap>& gt, const std::vector<TrackRecord>& gt_tracks) {
  if (pred.size() != gt.size()) {
    throw DataError("frame count mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(gt.size()) + " reference");
  }
  EvalReport r;
  r.frames = pred.size();
  std::vector<std::map<std::int32_t, std::int32_t>> matches(pred.size());
  std::size_t total_pred = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (!pred[t].same_shape(gt[t])) throw DataError("frame " + std::to_string(t) + " sizes differ");
    std::size_t np = 0, ng = 0;
    matches[t] = match_frame(pred[t], gt[t], np, ng);
    r.true_positives += matches[t].size();
    r.false_positives += np - matches[t].size();
    r.false_negatives += ng - matches[t].size();
    total_pred += np;
  }
  r.no_predictions = total_pred == 0;
  const auto tp = static_cast<double>(r.true_positives);
  r.precision = r.no_predictions ? 1.0 : tp / static_cast<double>(r.true_positives + r.false_positives);
  const std::size_t gt_total = r.true_positives + r.false_negatives;
  r.recall = gt_total == 0 ? 1.0 : tp / static_cast<double>(gt_total);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;

  // Per reference track: which predicted labels cover it, frame by frame.
  std::map<std::int32_t, std::vector<std::int32_t>> cover;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    std::set<std::int32_t> present;
    for (const std::int32_t l : gt[t].pixels()) {
      if (l > 0) present.insert(l);
    }
    for (const std::int32_t g : present) {
      const auto it = matches[t].find(g);
      cover[g].push_back(it == matches[t].end() ? 0 : it->second);
    }
  }
  r.gt_tracks = cover.size();
  for (const auto& [g, labels] : cover) {
    const bool pure = std::all_of(labels.begin(), labels.end(),
                                  [&](std::int32_t p) { return p != 0 && p == labels.front(); });
    if (pure) ++r.pure_tracks;
    std::int32_t last = 0;
    for (const std::int32_t p : labels) {
      if (p == 0) continue;
      if (last != 0 && p != last) ++r.identity_switches;
      last = p;
    }
  }
  r.track_purity = r.gt_tracks == 0 ? 1.0 : static_cast<double>(r.pure_tracks) / static_cast<double>(r.gt_tracks);

  std::map<std::int32_t, std::int32_t> pred_parent;
  std::map<std::int32_t, int> pred_children;
  for (const TrackRecord& t : pred_tracks) {
    pred_parent[t.label] = t.parent;
    if (t.parent != 0) ++pred_children[t.parent];
  }
  for (const auto& [p, n] : pred_children) {
    if (n >= 2) ++r.predicted_mitoses;
  }
  std::map<std::int32_t, std::vector<const TrackRecord*>> gt_children;
  std::map<std::int32_t, const TrackRecord*> gt_by_label;
  for (const TrackRecord& t : gt_tracks) {
    gt_by_label[t.label] = &t;
    if (t.parent != 0) gt_children[t.parent].push_back(&t);
  }
  for (const auto& [parent, kids] : gt_children) {
    if (kids.size() < 2 || !gt_by_label.contains(parent)) continue;
    ++r.mitoses_expected;
    const TrackRecord& pt = *gt_by_label.at(parent);
    if (pt.end < 0 || static_cast<std::size_t>(pt.end) >= matches.size()) continue;
    const auto pm = matches[static_cast<std::size_t>(pt.end)].find(parent);
    if (pm == matches[static_cast<std::size_t>(pt.end)].end()) continue;
    bool detected = true;
    for (const TrackRecord* kid : kids) {
      if (static_cast<std::size_t>(kid->begin) >= matches.size()) {
        detected = false;
        break;
      }
      const auto& fm = matches[static_cast<std::size_t>(kid->begin)];
      const auto km = fm.find(kid->label);
      if (km == fm.end() || pred_parent[km->second] != pm->second) detected = false;
    }
    if (detected) ++r.mitoses_detected;
  }
  return r;
}

EvalReport evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto pf = mask_files(pred_dir);
  const auto gf = mask_files(gt_dir);
  if (pf.size() != gf.size()) {
    throw DataError("frame count mismatch: " + std::to_string(pf.size()) + " predicted vs " +
                    std::to_string(gf.size()) + " reference");
  }
  std::vector<LabelMap> pred, gt;
  for (const auto& p : pf) pred.push_back(load_labels(p));
  for (const auto& p : gf) gt.push_back(load_labels(p));
  return evaluate(pred, read_tracks(pred_dir / "res_track.txt"), gt,
                  read_tracks(gt_dir / "man_track.txt"));
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["frames"] = r.frames;
  j["detection"] = {{"true_positives", r.true_positives},
                    {"false_positives", r.false_positives},
                    {"false_negatives", r.false_negatives},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"f1", r.f1},
                    {"no_predictions", r.no_predictions}};
  j["tracking"] = {{"gt_tracks", r.gt_tracks},
                   {"pure_tracks", r.pure_tracks},
                   {"track_purity", r.track_purity},
                   {"identity_switches", r.identity_switches}};
  j["mitosis"] = {{"expected", r.mitoses_expected},
                  {"detected", r.mitoses_detected},
                  {"predicted", r.predicted_mitoses}};
  return j.dump(2) + "\n";
}

}  // namespace gravtrack
