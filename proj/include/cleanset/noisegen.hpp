#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cleanset/dataset.hpp"
#include "cleanset/rng.hpp"

namespace cleanset {

struct BlobSpec {
    std::size_t n_per_class = 500;
    int class_count = 4;
    std::size_t dim = 8;
    double center_spread = 1.0;  // centers drawn spread * N(0, I)
    double cluster_std = 0.35;
    std::vector<double> imbalance_ratios;  // empty = balanced; else per-class fractions
};

enum class NoiseKind { None, ClassificationBased, Boundary, Symmetric };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Boundary;
    double rate = 0.4;      // r for classification-based, eta otherwise
    int probe_epochs = 20;  // classification-based only
};

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind k);

// Gaussian clusters around randomly drawn centers. The salt only changes
// the point-sampling stream, so train and test sets drawn with different
// salts share the same class geometry.
LabeledDataset make_blobs(const BlobSpec& spec, std::uint64_t seed,
                          std::string_view point_stream_salt = "points");

// Instance-dependent noise from a probe classifier's training dynamics:
// average the probe's per-epoch predictions, take each sample's strongest
// non-true class as flip candidate, and flip exactly the floor(r*N) samples
// with the largest candidate probabilities (ties broken by sample id).
LabeledDataset apply_classification_noise(const LabeledDataset& ds, int probe_epochs, double r,
                                          std::uint64_t seed);

// Instance-dependent noise concentrated at class boundaries: exactly
// round(eta*N) samples are flipped to their nearest other class, sampled
// without replacement with weights increasing in boundary proximity.
LabeledDataset apply_boundary_idn(const LabeledDataset& ds, double eta, std::uint64_t seed);

// Class-independent control: each sample flips with probability eta to a
// uniformly random other class.
LabeledDataset apply_symmetric_noise(const LabeledDataset& ds, double eta, std::uint64_t seed);

LabeledDataset apply_noise(const LabeledDataset& ds, const NoiseSpec& spec, std::uint64_t seed);

// margin = dist(nearest other true-class center) - dist(own center);
// small margin = close to a boundary. Used by boundary IDN and its tests.
std::vector<double> boundary_margins(const LabeledDataset& ds, std::vector<int>* nearest_other);

}  // namespace cleanset
