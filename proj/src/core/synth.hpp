#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "core/dataset.hpp"

namespace fednod {

// Synthetic stand-in data: schematic faces (head ellipse, two eyes, mouth)
// whose mouth-opening ratio follows the class. Normal stays in [0, 0.1],
// Talking oscillates within [0.15, 0.4] across a video, Yawning ramps from
// 0.5 to 0.9. Frames are grouped into videos of 100.
struct SynthSpec {
  int n_per_class = 500;
  int resolution = 64;
  double noise_level = 0.05;  // gaussian pixel noise, in units of full scale
  std::uint64_t seed = 0;
};

FrameDataset synth_generate(const SynthSpec& spec);

// Same frames as synth_generate, written as a PGM folder dataset
// (out_dir/{normal,talking,yawning}/<video>_<frame>.pgm).
void synth_write(const SynthSpec& spec, const std::string& out_dir);

// Shared iteration: invokes fn for every frame in dataset order.
void synth_render_all(
    const SynthSpec& spec,
    const std::function<void(int label, const std::string& video_id, int frame_index,
                             ImageU8&& frame)>& fn);

}  // namespace fednod
