#include "gravtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "gravtrack/error.hpp"
#include "gravtrack/io.hpp"

namespace gravtrack {

namespace {

struct Agent {
  std::int32_t label = 0;
  int begin = 0;
  int end = 0;
  std::int32_t parent = 0;
  double radius = 0.0;
  std::vector<Vec2> pos;  // indexed by frame - begin
};

void reflect_step(Vec2& p, Vec2& v, double margin, int width, int height) {
  p += v;
  const double hi_x = width - 1 - margin;
  const double hi_y = height - 1 - margin;
  if (p.x < margin) {
    p.x = 2.0 * margin - p.x;
    v.x = -v.x;
  } else if (p.x > hi_x) {
    p.x = 2.0 * hi_x - p.x;
    v.x = -v.x;
  }
  if (p.y < margin) {
    p.y = 2.0 * margin - p.y;
    v.y = -v.y;
  } else if (p.y > hi_y) {
    p.y = 2.0 * hi_y - p.y;
    v.y = -v.y;
  }
}

void simulate(Agent& a, Vec2 start, Vec2 velocity, int width, int height) {
  a.pos.clear();
  Vec2 p = start;
  Vec2 v = velocity;
  for (int t = a.begin; t <= a.end; ++t) {
    a.pos.push_back(p);
    reflect_step(p, v, a.radius, width, height);
  }
}

Vec2 heading(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double a = angle(rng);
  return {std::cos(a), std::sin(a)};
}

bool separated(const std::vector<Agent>& agents, double min_dist) {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      const Agent& a = agents[i];
      const Agent& b = agents[j];
      if (a.parent != 0 && a.parent == b.parent) continue;
      const int lo = std::max(a.begin, b.begin);
      const int hi = std::min(a.end, b.end);
      for (int t = lo; t <= hi; ++t) {
        if (norm(a.pos[static_cast<std::size_t>(t - a.begin)] -
                 b.pos[static_cast<std::size_t>(t - b.begin)]) < min_dist) {
          return false;
        }
      }
    }
  }
  return true;
}

void validate(const SynthSpec& s) {
  if (s.width < 8 || s.height < 8) throw ParameterError("synth frame must be at least 8x8");
  if (s.frames < 1) throw ParameterError("synth frame count must be >= 1");
  if (s.blob_count < 0) throw ParameterError("synth blob count must be >= 0");
  if (!(s.radius_min > 0.0 && s.radius_min <= s.radius_max)) {
    throw ParameterError("synth radii must satisfy 0 < radius_min <= radius_max");
  }
  if (s.noise_sigma < 0.0) throw ParameterError("synth noise sigma must be >= 0");
  for (const auto& m : s.mitoses) {
    if (m.frame < 1 || m.frame >= s.frames) {
      throw ParameterError("mitosis frame must lie in [1, frames)");
    }
    if (m.blob >= s.blob_count) throw ParameterError("mitosis blob index out of range");
  }
}

}  // namespace

SynthSequence synthesize(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double packing = 3.0 * spec.radius_max;
  const double min_dist = spec.min_separation * spec.radius_max;

  std::vector<Agent> agents;
  bool placed_any = false;
  constexpr int kAttempts = 2000;
  int attempt = 0;
  for (; attempt < kAttempts; ++attempt) {
    agents.clear();
    bool ok = true;
    std::vector<Vec2> starts;
    for (int b = 0; b < spec.blob_count && ok; ++b) {
      Agent a;
      a.label = b + 1;
      a.begin = 0;
      a.end = spec.frames - 1;
      a.radius = spec.radius_min + (spec.radius_max - spec.radius_min) * unit(rng);
      bool found = false;
      for (int tries = 0; tries < 1000 && !found; ++tries) {
        const Vec2 p{a.radius + unit(rng) * (spec.width - 1 - 2 * a.radius),
                     a.radius + unit(rng) * (spec.height - 1 - 2 * a.radius)};
        found = std::all_of(starts.begin(), starts.end(),
                            [&](Vec2 q) { return norm(p - q) >= packing; });
        if (found) starts.push_back(p);
      }
      ok = found;
      if (ok) agents.push_back(a);
    }
    if (!ok) continue;
    placed_any = true;

    std::vector<Vec2> velocities;
    for (std::size_t b = 0; b < agents.size(); ++b) velocities.push_back(spec.speed * heading(rng));

    // Divisions truncate their parent and append two children.
    std::vector<int> divided;
    for (const auto& m : spec.mitoses) {
      int b = m.blob;
      if (b < 0) {
        std::vector<int> candidates;
        for (int i = 0; i < spec.blob_count; ++i) {
          if (std::find(divided.begin(), divided.end(), i) == divided.end()) candidates.push_back(i);
        }
        if (candidates.empty()) throw ParameterError("more mitoses than blobs");
        b = candidates[static_cast<std::size_t>(unit(rng) * candidates.size()) % candidates.size()];
      }
      if (std::find(divided.begin(), divided.end(), b) != divided.end()) {
        throw ParameterError("a blob can divide only once");
      }
      divided.push_back(b);
      agents[static_cast<std::size_t>(b)].end = m.frame - 1;
    }
    for (std::size_t b = 0; b < agents.size(); ++b) {
      simulate(agents[b], starts[b], velocities[b], spec.width, spec.height);
    }
    bool children_fit = true;
    for (std::size_t e = 0; e < spec.mitoses.size(); ++e) {
      const Agent parent = agents[static_cast<std::size_t>(divided[e])];
      // Parent position one frame past its end, replayed from its start.
      Vec2 p = starts[static_cast<std::size_t>(divided[e])];
      Vec2 v = velocities[static_cast<std::size_t>(divided[e])];
      for (int t = parent.begin; t <= parent.end; ++t) {
        reflect_step(p, v, parent.radius, spec.width, spec.height);
      }
      const Vec2 axis = heading(rng);
      const double r = parent.radius * spec.child_radius_ratio;
      auto inside = [&](Vec2 q) {
        return q.x >= r && q.y >= r && q.x <= spec.width - 1 - r && q.y <= spec.height - 1 - r;
      };
      const Vec2 offset = (spec.child_offset * r) * axis;
      if (!inside(p + offset) || !inside(p - offset)) children_fit = false;
      for (int s = 0; s < 2; ++s) {
        const double sgn = s == 0 ? 1.0 : -1.0;
        Agent child;
        child.label = static_cast<std::int32_t>(agents.size() + 1);
        child.begin = spec.mitoses[e].frame;
        child.end = spec.frames - 1;
        child.parent = parent.label;
        child.radius = parent.radius * spec.child_radius_ratio;
        const Vec2 start = clamp_to_domain(p + (sgn * spec.child_offset * child.radius) * axis, spec.width,
                                           spec.height);
        simulate(child, start, v + (sgn * spec.speed) * axis, spec.width, spec.height);
        agents.push_back(child);
      }
    }
    if (children_fit && separated(agents, min_dist)) break;
  }
  if (attempt == kAttempts) {
    throw DataError(placed_any ? "infeasible packing: blobs cannot keep their separation"
                               : "infeasible packing: blobs do not fit in the frame");
  }

  SynthSequence seq;
  std::normal_distribution<double> noise(0.0, 1.0);
  const double amplitude = spec.peak - spec.background;
  for (const auto& a : agents) seq.tracks.push_back({a.label, a.begin, a.end, a.parent});
  for (int t = 0; t < spec.frames; ++t) {
    Image2D frame(spec.width, spec.height, spec.background);
    LabelMap gt(spec.width, spec.height, 0);
    Image2D nearest(spec.width, spec.height, 1e300);
    std::vector<SynthBlob> blobs(agents.size());
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const Agent& a = agents[k];
      if (t < a.begin || t > a.end) continue;
      const Vec2 c = a.pos[static_cast<std::size_t>(t - a.begin)];
      blobs[k] = {c, a.radius};
      const double sigma = a.radius / std::sqrt(2.0 * std::numbers::ln2);
      const int reach = static_cast<int>(std::ceil(4.0 * sigma));
      const int x0 = std::max(0, static_cast<int>(c.x) - reach);
      const int x1 = std::min(spec.width - 1, static_cast<int>(c.x) + reach + 1);
      const int y0 = std::max(0, static_cast<int>(c.y) - reach);
      const int y1 = std::min(spec.height - 1, static_cast<int>(c.y) + reach + 1);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double d2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
          frame(x, y) += amplitude * std::exp(-d2 / (2.0 * sigma * sigma));
          if (d2 <= a.radius * a.radius && d2 < nearest(x, y)) {
            nearest(x, y) = d2;
            gt(x, y) = a.label;
          }
        }
      }
    }
    for (auto& v : frame.vec()) v = std::clamp(v + spec.noise_sigma * noise(rng), 0.0, 1.0);
    seq.frames.push_back(std::move(frame));
    seq.ground_truth.push_back(std::move(gt));
    seq.blobs.push_back(std::move(blobs));
  }
  return seq;
}

void write_synth(const std::filesystem::path& dir, const SynthSequence& seq) {
  std::filesystem::create_directories(dir / "gt");
  char name[32];
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    std::snprintf(name, sizeof name, "t%03zu.tif", t);
    save_image16(dir / name, seq.frames[t]);
    std::snprintf(name, sizeof name, "mask%03zu.tif", t);
    save_labels(dir / "gt" / name, seq.ground_truth[t]);
  }
  write_tracks(dir / "gt" / "man_track.txt", seq.tracks);
}

}  // namespace gravtrack
