#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cleanset/noisegen.hpp"
#include "cleanset/stage1.hpp"
#include "cleanset/stage2.hpp"

namespace cleanset {

// Flat "section.key = value" text config; '#' starts a comment.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_kv_text(const std::string& text);
KeyValueMap read_kv_file(const std::string& path);
std::string serialize_kv(const KeyValueMap& kv);  // sorted, round-trip stable

struct TrainConfig {
    std::uint64_t seed = 1;

    BlobSpec data;
    std::size_t test_n_per_class = 125;
    NoiseSpec noise;

    int epochs = 60;
    int warmup_epochs = 5;
    double learning_rate = 0.02;
    int lr_decay_epoch = 30;  // 10x drop here
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::size_t batch_size = 64;

    double theta = 0.5;
    double theta_agg = 0.4;
    MembershipSource membership = MembershipSource::NoisyLabel;

    double lambda_min = 1.0;
    double lambda_max = 0.1;
    int n_max = 50;
    double head_lr_scale = 0.1;
    bool stage2_weight_scores = false;

    double lambda_u = 25.0;
    int lambda_u_ramp_epochs = 10;  // 0 = no ramp
    double sharpen_t = 0.5;
    double mixup_alpha = 4.0;
    int mix_k = 2;
    double jitter_sigma = 0.05;

    std::vector<std::size_t> hidden = {32, 32};
    std::size_t feature_dim = 16;

    // ablation switches
    bool use_stage1 = true;
    bool use_stage2 = true;

    KeyValueMap to_kv() const;
    static TrainConfig from_kv(const KeyValueMap& kv);  // unknown keys rejected
    void validate() const;
};

}  // namespace cleanset
