#pragma once

#include <optional>
#include <vector>

#include "cleanset/dataset.hpp"
#include "cleanset/gmm.hpp"
#include "cleanset/model.hpp"

namespace cleanset {

// Per-class feature centers on the unit sphere: normalized sum of the
// normalized member features. Empty classes have no center.
struct ClassCenters {
    std::vector<std::optional<std::vector<double>>> centers;
    std::vector<std::size_t> member_counts;
};

enum class MembershipSource { NoisyLabel, PredictedLabel };

enum class Stage { S1, S2 };

struct Partition {
    Stage stage = Stage::S1;
    std::vector<bool> is_clean;
    std::vector<double> score;
    std::vector<double> posterior_clean;
    std::vector<int> class_grouping;  // class -> group id; C means aggregated

    std::size_t clean_count() const {
        std::size_t n = 0;
        for (bool b : is_clean) n += b ? 1 : 0;
        return n;
    }
};

// `features` are raw extractor outputs; rows are normalized internally.
// Throws DegenerateDataError when a class's normalized features sum to
// (near) zero.
ClassCenters compute_centers(const Matrix& features, std::span<const int> membership_labels,
                             int class_count);

// Cosine similarity of each sample to its noisy label's center.
std::vector<double> compute_similarities(const Matrix& features, const ClassCenters& centers,
                                         std::span<const int> noisy_labels);

// Average binary clean/noisy posterior entropy per class (natural log);
// nullopt for classes whose per-class fit failed.
// Classes with entropy above theta_agg, or with no fit, map to the
// aggregate group id `class_count`; everything else maps to itself.
std::vector<int> aggregate_rare_classes(
    const std::vector<std::optional<double>>& class_entropies, double theta_agg);

struct Stage1Options {
    double theta = 0.5;
    double theta_agg = 0.4;
    MembershipSource membership = MembershipSource::NoisyLabel;
    GmmOptions gmm;
};

// Full Step 1-2 pipeline: features -> centers -> similarities ->
// per-class min-max normalization -> per-class GMM -> entropy aggregation
// -> refit on aggregated groups -> posterior threshold (clean = larger mean).
Partition stage1_partition(const ModelParams& model, const LabeledDataset& ds,
                           const Stage1Options& opts);

// Min-max to [0,1]; constant input maps to all 0.5.
std::vector<double> minmax_normalize(std::span<const double> values);

}  // namespace cleanset
