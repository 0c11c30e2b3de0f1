#include "core/synth.hpp"

#include <cmath>
#include <filesystem>

#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace fednod {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;
constexpr int kFramesPerVideo = 100;

constexpr double kBackground = 30.0;
constexpr double kFace = 200.0;
constexpr double kEye = 40.0;
constexpr double kMouth = 20.0;

struct FaceGeometry {
  double cx, cy;          // head center
  double rx, ry;          // head half-axes
  double eye_dx, eye_y;   // eye offsets from center
  double eye_rx, eye_ry;
  double mouth_y;         // mouth center row
  double mouth_rx;        // mouth half-width; half-height = ratio * half-width
};

FaceGeometry draw_geometry(Rng& rng, int res) {
  const double r = static_cast<double>(res);
  FaceGeometry g;
  g.cx = r * (0.5 + rng.uniform(-0.02, 0.02));
  g.cy = r * (0.5 + rng.uniform(-0.02, 0.02));
  g.rx = r * (0.30 + rng.uniform(-0.02, 0.02));
  g.ry = r * (0.40 + rng.uniform(-0.02, 0.02));
  g.eye_dx = r * (0.13 + rng.uniform(-0.01, 0.01));
  g.eye_y = g.cy - r * (0.15 + rng.uniform(-0.01, 0.01));
  g.eye_rx = r * 0.05;
  g.eye_ry = r * 0.035;
  g.mouth_y = g.cy + r * (0.18 + rng.uniform(-0.01, 0.01));
  g.mouth_rx = r * 0.18 * (1.0 + rng.uniform(-0.1, 0.1));
  return g;
}

inline bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

double sample_point(const FaceGeometry& g, double mouth_ry, double mouth_dy, double x,
                    double y) {
  if (!in_ellipse(x, y, g.cx, g.cy, g.rx, g.ry)) return kBackground;
  if (in_ellipse(x, y, g.cx - g.eye_dx, g.eye_y, g.eye_rx, g.eye_ry) ||
      in_ellipse(x, y, g.cx + g.eye_dx, g.eye_y, g.eye_rx, g.eye_ry)) {
    return kEye;
  }
  if (mouth_ry > 1e-6 &&
      in_ellipse(x, y, g.cx, g.mouth_y + mouth_dy, g.mouth_rx, mouth_ry)) {
    return kMouth;
  }
  return kFace;
}

// 2x2 supersampling keeps sub-pixel mouth openings visible at low resolutions.
ImageU8 render_frame(const FaceGeometry& g, double mouth_ratio, double mouth_dy, int res,
                     double noise_level, Rng& rng) {
  const double mouth_ry = mouth_ratio * g.mouth_rx;
  ImageU8 img;
  img.width = res;
  img.height = res;
  img.pixels.resize(static_cast<std::size_t>(res) * static_cast<std::size_t>(res));
  std::size_t o = 0;
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x, ++o) {
      double acc = 0.0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          acc += sample_point(g, mouth_ry, mouth_dy, x + 0.25 + 0.5 * sx,
                              y + 0.25 + 0.5 * sy);
        }
      }
      double v = acc * 0.25;
      if (noise_level > 0.0) v += rng.normal() * noise_level * 255.0;
      v = std::floor(v + 0.5);
      if (v < 0.0) v = 0.0;
      if (v > 255.0) v = 255.0;
      img.pixels[o] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

}  // namespace

void synth_render_all(
    const SynthSpec& spec,
    const std::function<void(int, const std::string&, int, ImageU8&&)>& fn) {
  if (spec.n_per_class < 1) {
    throw ConfigError("synth: n_per_class must be >= 1, got " +
                      std::to_string(spec.n_per_class));
  }
  if (spec.resolution < 16) {
    throw ConfigError("synth: resolution must be >= 16, got " +
                      std::to_string(spec.resolution));
  }
  if (spec.noise_level < 0.0) {
    throw ConfigError("synth: noise_level must be >= 0");
  }
  const char class_tag[3] = {'N', 'T', 'Y'};
  for (int c = 0; c < kNumClasses; ++c) {
    int remaining = spec.n_per_class;
    int video = 0;
    while (remaining > 0) {
      const int n_frames = remaining < kFramesPerVideo ? remaining : kFramesPerVideo;
      remaining -= n_frames;
      char vid[8];
      std::snprintf(vid, sizeof vid, "%c%04d", class_tag[c], video);
      const std::string video_id(vid);

      Rng rng(derive_seed(spec.seed, 0x5e, static_cast<std::uint64_t>(c),
                          static_cast<std::uint64_t>(video)));
      const FaceGeometry g = draw_geometry(rng, spec.resolution);
      const double talk_period = rng.uniform(8.0, 20.0);
      const double talk_phase = rng.uniform(0.0, kTau);

      for (int f = 0; f < n_frames; ++f) {
        const double dy = spec.resolution * rng.uniform(-0.01, 0.01);
        double ratio = 0.0;
        switch (c) {
          case 0:
            ratio = rng.uniform(0.0, 0.1);
            break;
          case 1:
            ratio = 0.275 + 0.125 * std::sin(kTau * f / talk_period + talk_phase);
            break;
          default:
            ratio = n_frames > 1 ? 0.5 + 0.4 * (static_cast<double>(f) / (n_frames - 1))
                                 : 0.5;
            break;
        }
        fn(c, video_id, f, render_frame(g, ratio, dy, spec.resolution, spec.noise_level, rng));
      }
      ++video;
    }
  }
}

FrameDataset synth_generate(const SynthSpec& spec) {
  FrameDataset ds;
  ds.height = spec.resolution;
  ds.width = spec.resolution;
  ds.samples.reserve(static_cast<std::size_t>(spec.n_per_class) * kNumClasses);
  synth_render_all(spec, [&](int label, const std::string& video_id, int frame_index,
                             ImageU8&& frame) {
    FrameSample s;
    s.label = label;
    s.video_id = video_id;
    s.frame_index = frame_index;
    s.pixels = Tensor({1, frame.height, frame.width});
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
      s.pixels.data[i] = byte_to_unit(frame.pixels[i]);
    }
    ds.samples.push_back(std::move(s));
  });
  return ds;
}

void synth_write(const SynthSpec& spec, const std::string& out_dir) {
  const fs::path root(out_dir);
  for (const char* name : kClassNames) {
    fs::create_directories(root / name);
  }
  synth_render_all(spec, [&](int label, const std::string& video_id, int frame_index,
                             ImageU8&& frame) {
    char name[32];
    std::snprintf(name, sizeof name, "%s_%06d.pgm", video_id.c_str(), frame_index);
    write_pgm((root / kClassNames[static_cast<std::size_t>(label)] / name).string(), frame);
  });
}

}  // namespace fednod
