#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stabnet/tensor.hpp"

namespace stabnet {

// Synthetic datasets. Generation is a pure function of the parameters
// and the seed, so a run can always be pinned to exact data.

struct FrameDataset {
  std::vector<Vector> features;
  std::vector<int> labels;
  int feature_dim = 0;
  int num_classes = 0;
  std::string generator;  // how this data was made, for provenance
  uint64_t seed = 0;
  std::vector<Vector> class_means;  // gaussian generator only

  int size() const { return static_cast<int>(features.size()); }
};

struct SequenceDataset {
  std::vector<std::vector<Vector>> frames;  // [sequence][timestep]
  std::vector<std::vector<int>> labels;     // matching shape
  int feature_dim = 0;
  int num_classes = 0;
  std::string generator;
  uint64_t seed = 0;

  int size() const { return static_cast<int>(frames.size()); }
  int total_frames() const;
};

struct SplitSpec {
  double cv_fraction = 0.2;
  uint64_t seed = 0;
};

/// Isotropic Gaussian blobs: class means placed deterministically from
/// the seed with pairwise distance >= class_separation, then n frames
/// drawn round-robin over classes (so counts differ by at most one) as
/// mean + noise_sigma * standard normal.
FrameDataset gen_gaussian_frames(int num_classes, int feature_dim, int n, double class_separation,
                                 double noise_sigma, uint64_t seed);

/// Per-frame sequence labeling that needs memory: frame t shows a
/// one-hot symbol from an alphabet of size K and is labeled with the
/// symbol shown at t - delay. The first `delay` frames get a designated
/// blank class (index K), so num_classes = K + 1. A memoryless
/// classifier can do no better than chance on frames t >= delay.
SequenceDataset gen_delayed_recall(int seq_len, int delay, int alphabet, int n, uint64_t seed);

/// Deterministic shuffled split; train gets ceil(n*(1-f)) items, cv the
/// rest. Throws if either side would be empty.
std::pair<FrameDataset, FrameDataset> split(const FrameDataset& data, const SplitSpec& spec);
std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& data,
                                                  const SplitSpec& spec);

/// Every frame of every sequence as one frame dataset (order preserved),
/// for training a memoryless baseline on sequence data.
FrameDataset flatten(const SequenceDataset& data);

// Frame datasets as CSV, columns: label,f0,f1,...,f{dim-1}. Features
// are printed with 17 significant digits, which round-trips doubles
// exactly. Sequence datasets as JSON lines, one object per sequence:
// {"frames":[[...],...],"labels":[...]}.
void save_frames_csv(const FrameDataset& data, const std::string& path);
FrameDataset load_frames_csv(const std::string& path);
void save_sequences_jsonl(const SequenceDataset& data, const std::string& path);
SequenceDataset load_sequences_jsonl(const std::string& path);

}  // namespace stabnet
