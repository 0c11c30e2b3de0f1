#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace fednod {

int class_index(const std::string& name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (name == kClassNames[static_cast<std::size_t>(c)]) return c;
  }
  return -1;
}

std::vector<int> FrameDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const FrameSample& s : samples) out.push_back(s.label);
  return out;
}

std::vector<int> SequenceDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const SequenceSample& s : samples) out.push_back(s.label);
  return out;
}

bool parse_frame_name(const std::string& stem, std::string& video_id,
                      std::int64_t& frame_index) {
  const std::size_t us = stem.rfind('_');
  if (us == std::string::npos || us == 0 || us + 1 >= stem.size()) return false;
  const std::string digits = stem.substr(us + 1);
  for (char c : digits) {
    if (c < '0' || c > '9') return false;
  }
  try {
    frame_index = std::stoll(digits);
  } catch (const std::exception&) {
    return false;
  }
  video_id = stem.substr(0, us);
  return true;
}

std::uint8_t input_to_byte(float x) {
  const double unit = static_cast<double>(x) * 0.5 + 0.5;
  double v = std::floor(unit * 255.0 + 0.5);
  if (v < 0.0) v = 0.0;
  if (v > 255.0) v = 255.0;
  return static_cast<std::uint8_t>(v);
}

namespace {

FrameSample sample_from_image(const ImageU8& img, int label, std::string video_id,
                              std::int64_t frame_index, int target_resolution) {
  const ImageU8* use = &img;
  ImageU8 resized;
  if (target_resolution > 0 &&
      (img.width != target_resolution || img.height != target_resolution)) {
    resized = resize_bilinear(img, target_resolution, target_resolution);
    use = &resized;
  }
  FrameSample s;
  s.label = label;
  s.video_id = std::move(video_id);
  s.frame_index = frame_index;
  s.pixels = Tensor({1, use->height, use->width});
  for (std::size_t i = 0; i < use->pixels.size(); ++i) {
    s.pixels.data[i] = byte_to_unit(use->pixels[i]);
  }
  return s;
}

struct ManifestRow {
  std::string path;
  int label;
  std::string video_id;
  std::int64_t frame_index;
};

std::vector<ManifestRow> read_manifest(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw IoError(file.string() + ": cannot open manifest");
  std::string line;
  if (!std::getline(f, line)) throw DataError(file.string() + ": empty manifest");
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != "path,label,video_id,frame_index") {
    throw DataError(file.string() + ": manifest header must be "
                    "'path,label,video_id,frame_index', got '" + line + "'");
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string path, label, vid, fidx;
    if (!std::getline(ss, path, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, vid, ',') || !std::getline(ss, fidx)) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    ManifestRow r;
    r.path = path;
    r.label = class_index(label);
    if (r.label < 0) {
      try {
        r.label = std::stoi(label);
      } catch (const std::exception&) {
        r.label = -1;
      }
    }
    if (r.label < 0 || r.label >= kNumClasses) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": bad label '" +
                      label + "'");
    }
    r.video_id = vid;
    try {
      r.frame_index = std::stoll(fidx);
    } catch (const std::exception&) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": bad frame_index '" +
                      fidx + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

FrameDataset load_folder_dataset(const std::string& root, int target_resolution,
                                 LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  FrameDataset ds;

  const fs::path rootp(root);
  if (!fs::is_directory(rootp)) {
    throw DataError(root + ": dataset root is not a directory");
  }

  const fs::path manifest = rootp / "manifest.csv";
  if (fs::exists(manifest)) {
    for (const ManifestRow& row : read_manifest(manifest)) {
      const fs::path p = rootp / row.path;
      try {
        ImageU8 img = read_pgm(p.string());
        ds.samples.push_back(
            sample_from_image(img, row.label, row.video_id, row.frame_index,
                              target_resolution));
      } catch (const Error& e) {
        rep.file_errors.push_back(e.what());
      }
    }
  } else {
    for (int c = 0; c < kNumClasses; ++c) {
      const fs::path dir = rootp / kClassNames[static_cast<std::size_t>(c)];
      if (!fs::is_directory(dir)) {
        throw DataError(root + ": missing class folder '" +
                        kClassNames[static_cast<std::size_t>(c)] + "'");
      }
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& p : files) {
        std::string vid;
        std::int64_t fidx = 0;
        if (!parse_frame_name(p.stem().string(), vid, fidx)) {
          rep.file_errors.push_back(p.string() +
                                    ": name does not match <video_id>_<frame_index>.pgm");
          continue;
        }
        try {
          ImageU8 img = read_pgm(p.string());
          ds.samples.push_back(sample_from_image(img, c, vid, fidx, target_resolution));
        } catch (const Error& e) {
          rep.file_errors.push_back(e.what());
        }
      }
    }
  }

  if (ds.samples.empty()) {
    throw DataError(root + ": no loadable samples (" +
                    std::to_string(rep.file_errors.size()) + " files failed)");
  }
  ds.height = static_cast<int>(ds.samples.front().pixels.dim(1));
  ds.width = static_cast<int>(ds.samples.front().pixels.dim(2));
  for (const FrameSample& s : ds.samples) {
    if (s.pixels.dim(1) != ds.height || s.pixels.dim(2) != ds.width) {
      throw DataError(root + ": mixed frame sizes: " + shape_str(s.pixels.shape) +
                      " vs " + std::to_string(ds.height) + "x" + std::to_string(ds.width) +
                      " (set a target resolution)");
    }
  }
  rep.loaded = ds.samples.size();
  return ds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1), got " +
                      std::to_string(train_fraction));
  }
  std::array<std::vector<std::size_t>, kNumClasses> per_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= kNumClasses) {
      throw DataError("stratified_split: label " + std::to_string(c) + " out of range");
    }
    per_class[static_cast<std::size_t>(c)].push_back(i);
  }
  std::vector<std::size_t> train, test;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& cls = per_class[static_cast<std::size_t>(c)];
    if (cls.size() < 2) {
      throw DataError(std::string("stratified_split: class '") +
                      kClassNames[static_cast<std::size_t>(c)] + "' has " +
                      std::to_string(cls.size()) + " samples; need >= 2");
    }
    Rng rng(derive_seed(seed, 0x51, static_cast<std::uint64_t>(c)));
    rng.shuffle(cls);
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(cls.size())));
    for (std::size_t i = 0; i < cls.size(); ++i) {
      (i < n_train ? train : test).push_back(cls[i]);
    }
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::size_t>> partition_clients(
    const std::vector<std::size_t>& train_idx, const std::vector<int>& labels, int k,
    std::uint64_t seed) {
  if (k < 1) throw ConfigError("client count must be >= 1, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > train_idx.size()) {
    throw DataError("cannot partition " + std::to_string(train_idx.size()) +
                    " samples across " + std::to_string(k) + " clients");
  }
  std::array<std::vector<std::size_t>, kNumClasses> per_class;
  for (std::size_t i : train_idx) {
    const int c = labels[i];
    if (c < 0 || c >= kNumClasses) {
      throw DataError("partition_clients: label " + std::to_string(c) + " out of range");
    }
    per_class[static_cast<std::size_t>(c)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> shards(static_cast<std::size_t>(k));
  for (int c = 0; c < kNumClasses; ++c) {
    auto& cls = per_class[static_cast<std::size_t>(c)];
    Rng rng(derive_seed(seed, 0x91, static_cast<std::uint64_t>(c)));
    rng.shuffle(cls);
    for (std::size_t i = 0; i < cls.size(); ++i) {
      shards[i % static_cast<std::size_t>(k)].push_back(cls[i]);
    }
  }
  for (std::size_t s = 0; s < shards.size(); ++s) {
    if (shards[s].empty()) {
      throw DataError("client " + std::to_string(s) + " received an empty shard (" +
                      std::to_string(train_idx.size()) + " samples over " +
                      std::to_string(k) + " clients)");
    }
  }
  return shards;
}

SequenceDataset assemble_sequences(const FrameDataset& frames, int sequence_length,
                                   int frame_skipping) {
  if (sequence_length < 1) {
    throw ConfigError("sequence_length must be >= 1, got " + std::to_string(sequence_length));
  }
  if (frame_skipping < 1) {
    throw ConfigError("frame_skipping must be >= 1, got " + std::to_string(frame_skipping));
  }
  const std::int64_t L = sequence_length;
  const std::int64_t s = frame_skipping;
  const std::int64_t span = (L - 1) * s + 1;
  const std::int64_t hw = static_cast<std::int64_t>(frames.height) * frames.width;

  // Group frame positions per video, in sorted video order.
  std::map<std::string, std::vector<std::size_t>> videos;
  for (std::size_t i = 0; i < frames.samples.size(); ++i) {
    videos[frames.samples[i].video_id].push_back(i);
  }

  SequenceDataset out;
  out.length = sequence_length;
  out.height = frames.height;
  out.width = frames.width;
  for (auto& [vid, members] : videos) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return frames.samples[a].frame_index < frames.samples[b].frame_index;
    });
    const std::int64_t n = static_cast<std::int64_t>(members.size());
    for (std::int64_t start = 0; start + span <= n; start += span) {
      SequenceSample seq;
      seq.video_id = vid;
      seq.clip = Tensor({1, L, frames.height, frames.width});
      std::array<int, kNumClasses> votes{};
      for (std::int64_t j = 0; j < L; ++j) {
        const FrameSample& f = frames.samples[members[static_cast<std::size_t>(start + j * s)]];
        std::copy(f.pixels.data.begin(), f.pixels.data.end(),
                  seq.clip.data.begin() + static_cast<std::ptrdiff_t>(j * hw));
        votes[static_cast<std::size_t>(f.label)] += 1;
        if (j == 0) seq.start_frame = f.frame_index;
      }
      int best = 0;
      bool tie = false;
      for (int c = 1; c < kNumClasses; ++c) {
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) {
          best = c;
          tie = false;
        } else if (votes[static_cast<std::size_t>(c)] == votes[static_cast<std::size_t>(best)]) {
          tie = true;
        }
      }
      if (tie) {
        best = frames.samples[members[static_cast<std::size_t>(start + (L / 2) * s)]].label;
      }
      seq.label = best;
      out.samples.push_back(std::move(seq));
    }
  }
  return out;
}

namespace {

template <typename Sample>
Tensor gather_batch(const std::vector<Sample>& samples, const Tensor& proto,
                    const std::vector<std::size_t>& order, std::size_t first,
                    std::size_t count, std::vector<int>* labels_out,
                    const Tensor& (*pix)(const Sample&)) {
  std::vector<std::int64_t> shape{static_cast<std::int64_t>(count)};
  for (std::int64_t d : proto.shape) shape.push_back(d);
  Tensor batch(shape);
  const std::int64_t item = proto.numel();
  if (labels_out) labels_out->resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Sample& s = samples[order[first + i]];
    const Tensor& p = pix(s);
    float* dst = batch.ptr() + static_cast<std::int64_t>(i) * item;
    const float* src = p.ptr();
    for (std::int64_t j = 0; j < item; ++j) dst[j] = standardize_unit(src[j]);
    if (labels_out) (*labels_out)[i] = s.label;
  }
  return batch;
}

const Tensor& frame_pixels(const FrameSample& s) { return s.pixels; }
const Tensor& seq_pixels(const SequenceSample& s) { return s.clip; }

}  // namespace

Tensor make_frame_batch(const FrameDataset& ds, const std::vector<std::size_t>& order,
                        std::size_t first, std::size_t count, std::vector<int>* labels_out) {
  if (ds.samples.empty()) throw DataError("make_frame_batch: empty dataset");
  return gather_batch<FrameSample>(ds.samples, ds.samples.front().pixels, order, first,
                                   count, labels_out, &frame_pixels);
}

Tensor make_sequence_batch(const SequenceDataset& ds, const std::vector<std::size_t>& order,
                           std::size_t first, std::size_t count, std::vector<int>* labels_out) {
  if (ds.samples.empty()) throw DataError("make_sequence_batch: empty dataset");
  return gather_batch<SequenceSample>(ds.samples, ds.samples.front().clip, order, first,
                                      count, labels_out, &seq_pixels);
}

SampleSet::SampleSet(const FrameDataset* frames, std::vector<std::size_t> idx)
    : frames_(frames), idx_(std::move(idx)) {}

SampleSet::SampleSet(const SequenceDataset* seqs, std::vector<std::size_t> idx)
    : seqs_(seqs), idx_(std::move(idx)) {}

int SampleSet::label(std::size_t i) const {
  const std::size_t j = idx_[i];
  return frames_ ? frames_->samples[j].label : seqs_->samples[j].label;
}

Tensor SampleSet::make_batch(const std::vector<std::size_t>& order, std::size_t first,
                             std::size_t count, std::vector<int>* labels_out) const {
  std::vector<std::size_t> abs(count);
  for (std::size_t i = 0; i < count; ++i) abs[i] = idx_[order[first + i]];
  if (frames_) return make_frame_batch(*frames_, abs, 0, count, labels_out);
  if (seqs_) return make_sequence_batch(*seqs_, abs, 0, count, labels_out);
  throw DataError("SampleSet: empty view");
}

}  // namespace fednod
