#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/tensor.hpp"

namespace fednod {

inline constexpr int kNumClasses = 3;
inline constexpr std::array<const char*, 3> kClassNames = {"normal", "talking", "yawning"};

// Returns 0/1/2 for a class folder name, -1 otherwise.
int class_index(const std::string& name);

// One preprocessed grayscale frame; pixels are float32 in [0, 1].
struct FrameSample {
  Tensor pixels;  // (1, H, W)
  int label = 0;
  std::string video_id;
  std::int64_t frame_index = 0;
};

// One frame sequence; clip is (1, L, H, W) in [0, 1].
struct SequenceSample {
  Tensor clip;
  int label = 0;
  std::string video_id;
  std::int64_t start_frame = 0;
};

struct FrameDataset {
  std::vector<FrameSample> samples;
  int height = 0;
  int width = 0;

  std::vector<int> labels() const;
};

struct SequenceDataset {
  std::vector<SequenceSample> samples;
  int length = 0;
  int height = 0;
  int width = 0;

  std::vector<int> labels() const;
};

struct LoadReport {
  std::size_t loaded = 0;
  std::vector<std::string> file_errors;  // per-file problems; loading continued
};

// Loads `root/{normal,talking,yawning}/<video_id>_<frame>.pgm`, labels
// inferred from the folder. A `manifest.csv` at the root (header
// `path,label,video_id,frame_index`) overrides folder inference. Frames are
// resized to target_resolution when it is nonzero. Files are visited in
// sorted name order so the result is scheduling-independent.
FrameDataset load_folder_dataset(const std::string& root, int target_resolution = 0,
                                 LoadReport* report = nullptr);

// `<video_id>_<frame_index>` split at the last underscore.
bool parse_frame_name(const std::string& stem, std::string& video_id, std::int64_t& frame_index);

// byte -> [0,1] -> standardized to [-1,1] with mean 0.5, std 0.5.
inline float byte_to_unit(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }
inline float standardize_unit(float unit) { return (unit - 0.5f) / 0.5f; }
inline float byte_to_input(std::uint8_t b) { return standardize_unit(byte_to_unit(b)); }

// Inverse of byte_to_input, rounded back to a byte.
std::uint8_t input_to_byte(float x);

// Per class: seeded shuffle, then exactly floor(train_fraction * n_c) samples
// go to train. Returns (train indices, test indices). Every class needs >= 2
// samples.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction, std::uint64_t seed);

// Per-class seeded shuffle, then round-robin deal across k shards; shard
// sizes differ by <= 1 per class. Shards are disjoint and cover train_idx.
std::vector<std::vector<std::size_t>> partition_clients(
    const std::vector<std::size_t>& train_idx, const std::vector<int>& labels, int k,
    std::uint64_t seed);

// Non-overlapping windows per video: span = (L-1)*s + 1, starts at
// 0, span, 2*span, ... while start + span <= frame count. Sequence label is
// the majority member label, ties broken by the middle member.
SequenceDataset assemble_sequences(const FrameDataset& frames, int sequence_length,
                                   int frame_skipping);

// Gathers samples[order[first..first+count)] into a standardized model input
// batch; labels_out receives the matching labels.
Tensor make_frame_batch(const FrameDataset& ds, const std::vector<std::size_t>& order,
                        std::size_t first, std::size_t count, std::vector<int>* labels_out);
Tensor make_sequence_batch(const SequenceDataset& ds, const std::vector<std::size_t>& order,
                           std::size_t first, std::size_t count, std::vector<int>* labels_out);

// A training/eval view over either dataset kind: fixed subset, batch maker.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(const FrameDataset* frames, std::vector<std::size_t> idx);
  SampleSet(const SequenceDataset* seqs, std::vector<std::size_t> idx);

  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  int label(std::size_t i) const;
  const std::vector<std::size_t>& indices() const { return idx_; }

  // Batch of items order[first..first+count), where order indexes this set.
  Tensor make_batch(const std::vector<std::size_t>& order, std::size_t first,
                    std::size_t count, std::vector<int>* labels_out) const;

 private:
  const FrameDataset* frames_ = nullptr;
  const SequenceDataset* seqs_ = nullptr;
  std::vector<std::size_t> idx_;
};

}  // namespace fednod
