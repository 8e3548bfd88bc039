#include "cleanset/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cleanset/errors.hpp"

namespace cleanset {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class KvReader {
public:
    explicit KvReader(const KeyValueMap& kv) : kv_(kv) {}

    std::string str(const std::string& key, const std::string& dflt) {
        seen_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }
    double num(const std::string& key, double dflt) {
        std::string s = str(key, "");
        if (s.empty()) return dflt;
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("config field '" + key + "': not a number: '" + s + "'");
        }
    }
    long integer(const std::string& key, long dflt) {
        double v = num(key, static_cast<double>(dflt));
        long l = static_cast<long>(v);
        if (static_cast<double>(l) != v)
            throw ConfigError("config field '" + key + "': expected an integer");
        return l;
    }
    bool boolean(const std::string& key, bool dflt) {
        std::string s = str(key, dflt ? "true" : "false");
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError("config field '" + key + "': expected true/false");
    }
    std::vector<double> num_list(const std::string& key) {
        std::string s = str(key, "");
        std::vector<double> out;
        if (s.empty()) return out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            try {
                out.push_back(std::stod(item));
            } catch (...) {
                throw ConfigError("config field '" + key + "': bad list element '" + item + "'");
            }
        }
        return out;
    }
    void reject_unknown() const {
        for (const auto& [k, v] : kv_)
            if (!seen_.count(k)) throw ConfigError("config field '" + k + "': unknown key");
    }

private:
    const KeyValueMap& kv_;
    std::set<std::string> seen_;
};

}  // namespace

KeyValueMap parse_kv_text(const std::string& text) {
    KeyValueMap kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": missing '='");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

KeyValueMap read_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_kv_text(ss.str());
}

std::string serialize_kv(const KeyValueMap& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

KeyValueMap TrainConfig::to_kv() const {
    KeyValueMap kv;
    kv["seed"] = std::to_string(seed);
    kv["data.n_per_class"] = std::to_string(data.n_per_class);
    kv["data.class_count"] = std::to_string(data.class_count);
    kv["data.dim"] = std::to_string(data.dim);
    kv["data.center_spread"] = fmt_double(data.center_spread);
    kv["data.cluster_std"] = fmt_double(data.cluster_std);
    if (!data.imbalance_ratios.empty()) {
        std::string s;
        for (std::size_t i = 0; i < data.imbalance_ratios.size(); ++i) {
            if (i) s += ",";
            s += fmt_double(data.imbalance_ratios[i]);
        }
        kv["data.imbalance"] = s;
    }
    kv["data.test_n_per_class"] = std::to_string(test_n_per_class);
    kv["noise.kind"] = to_string(noise.kind);
    kv["noise.rate"] = fmt_double(noise.rate);
    kv["noise.probe_epochs"] = std::to_string(noise.probe_epochs);
    kv["train.epochs"] = std::to_string(epochs);
    kv["train.warmup_epochs"] = std::to_string(warmup_epochs);
    kv["train.learning_rate"] = fmt_double(learning_rate);
    kv["train.lr_decay_epoch"] = std::to_string(lr_decay_epoch);
    kv["train.momentum"] = fmt_double(momentum);
    kv["train.weight_decay"] = fmt_double(weight_decay);
    kv["train.batch_size"] = std::to_string(batch_size);
    kv["stage1.theta"] = fmt_double(theta);
    kv["stage1.theta_agg"] = fmt_double(theta_agg);
    kv["stage1.membership"] =
        membership == MembershipSource::NoisyLabel ? "noisy-label" : "predicted-label";
    kv["stage2.lambda_min"] = fmt_double(lambda_min);
    kv["stage2.lambda_max"] = fmt_double(lambda_max);
    kv["stage2.n_max"] = std::to_string(n_max);
    kv["stage2.head_lr_scale"] = fmt_double(head_lr_scale);
    kv["stage2.weight_scores"] = stage2_weight_scores ? "true" : "false";
    kv["mixmatch.lambda_u"] = fmt_double(lambda_u);
    kv["mixmatch.lambda_u_ramp_epochs"] = std::to_string(lambda_u_ramp_epochs);
    kv["mixmatch.sharpen_t"] = fmt_double(sharpen_t);
    kv["mixmatch.alpha"] = fmt_double(mixup_alpha);
    kv["mixmatch.k"] = std::to_string(mix_k);
    kv["mixmatch.jitter_sigma"] = fmt_double(jitter_sigma);
    {
        std::string s;
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(hidden[i]);
        }
        kv["model.hidden"] = s;
    }
    kv["model.feature_dim"] = std::to_string(feature_dim);
    kv["ablate.use_stage1"] = use_stage1 ? "true" : "false";
    kv["ablate.use_stage2"] = use_stage2 ? "true" : "false";
    return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValueMap& kv) {
    TrainConfig c;
    KvReader r(kv);
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 1));
    c.data.n_per_class = static_cast<std::size_t>(r.integer("data.n_per_class", 500));
    c.data.class_count = static_cast<int>(r.integer("data.class_count", 4));
    c.data.dim = static_cast<std::size_t>(r.integer("data.dim", 8));
    c.data.center_spread = r.num("data.center_spread", 1.0);
    c.data.cluster_std = r.num("data.cluster_std", 0.35);
    c.data.imbalance_ratios = r.num_list("data.imbalance");
    c.test_n_per_class = static_cast<std::size_t>(r.integer("data.test_n_per_class", 125));
    c.noise.kind = noise_kind_from_string(r.str("noise.kind", "boundary"));
    c.noise.rate = r.num("noise.rate", 0.4);
    c.noise.probe_epochs = static_cast<int>(r.integer("noise.probe_epochs", 20));
    c.epochs = static_cast<int>(r.integer("train.epochs", 60));
    c.warmup_epochs = static_cast<int>(r.integer("train.warmup_epochs", 5));
    c.learning_rate = r.num("train.learning_rate", 0.02);
    c.lr_decay_epoch = static_cast<int>(r.integer("train.lr_decay_epoch", 30));
    c.momentum = r.num("train.momentum", 0.9);
    c.weight_decay = r.num("train.weight_decay", 0.0005);
    c.batch_size = static_cast<std::size_t>(r.integer("train.batch_size", 64));
    c.theta = r.num("stage1.theta", 0.5);
    c.theta_agg = r.num("stage1.theta_agg", 0.4);
    std::string mem = r.str("stage1.membership", "noisy-label");
    if (mem == "noisy-label") {
        c.membership = MembershipSource::NoisyLabel;
    } else if (mem == "predicted-label") {
        c.membership = MembershipSource::PredictedLabel;
    } else {
        throw ConfigError("config field 'stage1.membership': unknown value '" + mem + "'");
    }
    c.lambda_min = r.num("stage2.lambda_min", 1.0);
    c.lambda_max = r.num("stage2.lambda_max", 0.1);
    c.n_max = static_cast<int>(r.integer("stage2.n_max", 50));
    c.head_lr_scale = r.num("stage2.head_lr_scale", 0.1);
    c.stage2_weight_scores = r.boolean("stage2.weight_scores", false);
    c.lambda_u = r.num("mixmatch.lambda_u", 25.0);
    c.lambda_u_ramp_epochs = static_cast<int>(r.integer("mixmatch.lambda_u_ramp_epochs", 10));
    c.sharpen_t = r.num("mixmatch.sharpen_t", 0.5);
    c.mixup_alpha = r.num("mixmatch.alpha", 4.0);
    c.mix_k = static_cast<int>(r.integer("mixmatch.k", 2));
    c.jitter_sigma = r.num("mixmatch.jitter_sigma", 0.05);
    std::vector<double> hid = r.num_list("model.hidden");
    if (!hid.empty()) {
        c.hidden.clear();
        for (double h : hid) c.hidden.push_back(static_cast<std::size_t>(h));
    }
    c.feature_dim = static_cast<std::size_t>(r.integer("model.feature_dim", 16));
    c.use_stage1 = r.boolean("ablate.use_stage1", true);
    c.use_stage2 = r.boolean("ablate.use_stage2", true);
    r.reject_unknown();
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("config field 'train.epochs': must be >= 0");
    if (warmup_epochs < 0) throw ConfigError("config field 'train.warmup_epochs': must be >= 0");
    if (warmup_epochs >= epochs)
        throw ConfigError("config field 'train.warmup_epochs': must be < train.epochs");
    if (learning_rate <= 0.0)
        throw ConfigError("config field 'train.learning_rate': must be positive");
    if (!(theta > 0.0 && theta < 1.0))
        throw ConfigError("config field 'stage1.theta': must be in (0,1)");
    if (theta_agg < 0.0) throw ConfigError("config field 'stage1.theta_agg': must be >= 0");
    if (noise.rate < 0.0 || noise.rate > 1.0)
        throw ConfigError("config field 'noise.rate': must be in [0,1]");
    if (mix_k < 1) throw ConfigError("config field 'mixmatch.k': must be >= 1");
    if (sharpen_t <= 0.0) throw ConfigError("config field 'mixmatch.sharpen_t': must be > 0");
    if (mixup_alpha <= 0.0) throw ConfigError("config field 'mixmatch.alpha': must be > 0");
    if (batch_size < 1) throw ConfigError("config field 'train.batch_size': must be >= 1");
    if (n_max < 0) throw ConfigError("config field 'stage2.n_max': must be >= 0");
    if (head_lr_scale < 0.0)
        throw ConfigError("config field 'stage2.head_lr_scale': must be >= 0");
    if (feature_dim < 1) throw ConfigError("config field 'model.feature_dim': must be >= 1");
    if (hidden.empty()) throw ConfigError("config field 'model.hidden': must be nonempty");
}

}  // namespace cleanset
