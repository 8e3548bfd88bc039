// Command-line front end: data generation, training, metric re-evaluation,
// ablation grid and hyperparameter sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cleanset/config.hpp"
#include "cleanset/dataset.hpp"
#include "cleanset/errors.hpp"
#include "cleanset/metrics.hpp"
#include "cleanset/trainer.hpp"

namespace fs = std::filesystem;
using namespace cleanset;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

TrainConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    KeyValueMap kv = config_path.empty() ? KeyValueMap{} : read_kv_file(config_path);
    TrainConfig cfg = TrainConfig::from_kv(kv);
    if (seed) cfg.seed = *seed;
    return cfg;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

int cmd_gen_data(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
    TrainConfig cfg = load_config(config_path, seed);
    fs::create_directories(out_dir);
    LabeledDataset train = build_train_dataset(cfg);
    LabeledDataset test = build_test_dataset(cfg);
    write_dataset((fs::path(out_dir) / "dataset.csv").string(), train);
    write_dataset((fs::path(out_dir) / "test.csv").string(), test);
    std::cout << "wrote " << train.size() << " train / " << test.size()
              << " test samples, realized noise rate " << fmt(train.noise_rate()) << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, bool dump_partitions) {
    TrainConfig cfg = load_config(config_path, seed);
    fs::create_directories(out_dir);
    std::string dump_dir = dump_partitions ? out_dir : "";
    TrainOutput out = run_training(cfg, dump_dir);
    write_run_report(out_dir, out.report);
    {
        std::ofstream os(fs::path(out_dir) / "config.txt", std::ios::binary);
        os << serialize_kv(cfg.to_kv());
    }
    if (!out.report.epochs.empty()) {
        const auto& last = out.report.epochs.back();
        std::cout << "final test acc " << fmt(last.test_acc_ensemble) << ", auc_s1 "
                  << fmt(last.auc_s1) << ", auc_s2 " << fmt(last.auc_s2) << "\n";
    } else {
        std::cout << "warmup-only run, test acc " << fmt(out.report.warmup_test_acc) << "\n";
    }
    return 0;
}

// Recomputes clean-identification metrics from partition dumps + dataset file.
int cmd_eval(const std::string& data_path, const std::string& dumps_dir,
             const std::string& out_dir) {
    LabeledDataset ds = read_dataset(data_path);
    std::vector<bool> truth(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        truth[i] = ds.true_labels[i] == ds.noisy_labels[i];
    std::map<std::int64_t, std::size_t> row_of_id;
    for (std::size_t i = 0; i < ds.size(); ++i) row_of_id[ds.ids[i]] = i;

    std::vector<fs::path> dumps;
    for (const auto& entry : fs::directory_iterator(dumps_dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("partitions_epoch_", 0) == 0) dumps.push_back(entry.path());
    }
    if (dumps.empty()) throw ConfigError("eval: no partition dumps in " + dumps_dir);
    std::sort(dumps.begin(), dumps.end());

    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "eval.csv", std::ios::binary);
    os << "epoch, auc_s1, auc_s2, n_s1, n_s2, var_s1_distribution, var_s2_distribution\n";
    int epoch = 0;
    for (const auto& path : dumps) {
        std::ifstream is(path);
        std::string line;
        std::getline(is, line);  // header
        std::vector<double> post_s1(ds.size()), post_s2(ds.size());
        std::vector<bool> clean_s1(ds.size()), clean_s2(ds.size());
        while (std::getline(is, line)) {
            std::stringstream ss(line);
            std::string id_s, stage, score_s, post_s, clean_s;
            std::getline(ss, id_s, ',');
            std::getline(ss, stage, ',');
            std::getline(ss, score_s, ',');
            std::getline(ss, post_s, ',');
            std::getline(ss, clean_s, ',');
            std::size_t row = row_of_id.at(std::stoll(id_s));
            if (stage == "S1") {
                post_s1[row] = std::stod(post_s);
                clean_s1[row] = clean_s == "1";
            } else {
                post_s2[row] = std::stod(post_s);
                clean_s2[row] = clean_s == "1";
            }
        }
        auto safe = [&](std::span<const double> s) {
            try {
                return auc(s, truth);
            } catch (const UndefinedMetricError&) {
                return std::numeric_limits<double>::quiet_NaN();
            }
        };
        std::size_t n1 = 0, n2 = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            n1 += clean_s1[i] ? 1 : 0;
            n2 += clean_s2[i] ? 1 : 0;
        }
        double v1 = std::numeric_limits<double>::quiet_NaN();
        double v2 = v1;
        try {
            v1 = variance(class_distribution(clean_s1, ds.noisy_labels, ds.class_count));
            v2 = variance(class_distribution(clean_s2, ds.noisy_labels, ds.class_count));
        } catch (const DegenerateDataError&) {
        }
        os << epoch << ", " << fmt(safe(post_s1)) << ", " << fmt(safe(post_s2)) << ", " << n1
           << ", " << n2 << ", " << fmt(v1) << ", " << fmt(v2) << "\n";
        ++epoch;
    }
    std::cout << "evaluated " << epoch << " epochs -> " << (fs::path(out_dir) / "eval.csv")
              << "\n";
    return 0;
}

// Four-cell grid: CE baseline / stage1-only / stage2-only / both.
int cmd_ablate(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir) {
    TrainConfig base = load_config(config_path, seed);
    fs::create_directories(out_dir);
    struct Cell {
        const char* name;
        bool s1, s2;
    };
    const Cell cells[] = {{"neither", false, false},
                          {"stage1-only", true, false},
                          {"stage2-only", false, true},
                          {"both", true, true}};
    std::ofstream os(fs::path(out_dir) / "ablation.csv", std::ios::binary);
    os << "cell, final_acc, mean_auc_s1, mean_auc_s2\n";
    for (const Cell& cell : cells) {
        TrainConfig cfg = base;
        cfg.use_stage1 = cell.s1;
        cfg.use_stage2 = cell.s2;
        TrainOutput out = run_training(cfg);
        write_run_report((fs::path(out_dir) / cell.name).string(), out.report);
        double acc = out.report.epochs.empty() ? out.report.warmup_test_acc
                                               : out.report.epochs.back().test_acc_ensemble;
        double a1 = 0.0, a2 = 0.0;
        int n1 = 0, n2 = 0;
        for (const auto& e : out.report.epochs) {
            if (!std::isnan(e.auc_s1)) a1 += e.auc_s1, ++n1;
            if (!std::isnan(e.auc_s2)) a2 += e.auc_s2, ++n2;
        }
        os << cell.name << ", " << fmt(acc) << ", " << fmt(n1 ? a1 / n1 : 0.0) << ", "
           << fmt(n2 ? a2 / n2 : 0.0) << "\n";
        std::cout << cell.name << ": final acc " << fmt(acc) << "\n";
    }
    return 0;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, const std::string& theta_s,
              const std::string& theta_agg_s, const std::string& lambda_min_s,
              const std::string& lambda_max_s, const std::string& n_max_s) {
    TrainConfig base = load_config(config_path, seed);
    fs::create_directories(out_dir);
    auto grid_or = [](const std::string& s, double dflt) {
        return s.empty() ? std::vector<double>{dflt} : parse_grid(s);
    };
    std::vector<double> thetas = grid_or(theta_s, base.theta);
    std::vector<double> thetas_agg = grid_or(theta_agg_s, base.theta_agg);
    std::vector<double> lmins = grid_or(lambda_min_s, base.lambda_min);
    std::vector<double> lmaxs = grid_or(lambda_max_s, base.lambda_max);
    std::vector<double> nmaxs = grid_or(n_max_s, static_cast<double>(base.n_max));

    std::ofstream os(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    os << "theta, theta_agg, lambda_min, lambda_max, n_max, final_acc, mean_auc_s1, "
          "mean_auc_s2\n";
    for (double th : thetas)
        for (double ta : thetas_agg)
            for (double lmin : lmins)
                for (double lmax : lmaxs)
                    for (double nm : nmaxs) {
                        TrainConfig cfg = base;
                        cfg.theta = th;
                        cfg.theta_agg = ta;
                        cfg.lambda_min = lmin;
                        cfg.lambda_max = lmax;
                        cfg.n_max = static_cast<int>(nm);
                        TrainOutput out = run_training(cfg);
                        double acc = out.report.epochs.empty()
                                         ? out.report.warmup_test_acc
                                         : out.report.epochs.back().test_acc_ensemble;
                        double a1 = 0.0, a2 = 0.0;
                        int c1 = 0, c2 = 0;
                        for (const auto& e : out.report.epochs) {
                            if (!std::isnan(e.auc_s1)) a1 += e.auc_s1, ++c1;
                            if (!std::isnan(e.auc_s2)) a2 += e.auc_s2, ++c2;
                        }
                        os << fmt(th) << ", " << fmt(ta) << ", " << fmt(lmin) << ", "
                           << fmt(lmax) << ", " << fmt(nm) << ", " << fmt(acc) << ", "
                           << fmt(c1 ? a1 / c1 : 0.0) << ", " << fmt(c2 ? a2 / c2 : 0.0)
                           << "\n";
                        os.flush();
                    }
    std::cout << "sweep written to " << (fs::path(out_dir) / "sweep.csv") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage clean-sample identification lab for instance-dependent label noise"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", data_path, dumps_dir;
    std::optional<std::uint64_t> seed;
    bool dump_parts = false;
    std::string theta_s, theta_agg_s, lambda_min_s, lambda_max_s, n_max_s;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key-value config file");
        sub->add_option("--seed", seed, "root seed (overrides config)");
        sub->add_option("--out", out_dir, "output directory");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a noisy dataset file");
    add_common(gen);
    CLI::App* train = app.add_subcommand("train", "run the training loop");
    add_common(train);
    train->add_flag("--dump-partitions", dump_parts, "write per-epoch partition dumps");
    CLI::App* eval = app.add_subcommand("eval", "recompute metrics from partition dumps");
    eval->add_option("--data", data_path, "dataset file from gen-data")->required();
    eval->add_option("--dumps", dumps_dir, "directory with partition dumps")->required();
    eval->add_option("--out", out_dir, "output directory");
    CLI::App* ablate = app.add_subcommand("ablate", "run the four-cell ablation grid");
    add_common(ablate);
    CLI::App* sweep = app.add_subcommand("sweep", "grid over selection hyperparameters");
    add_common(sweep);
    sweep->add_option("--theta", theta_s, "comma list of theta values");
    sweep->add_option("--theta-agg", theta_agg_s, "comma list of theta_agg values");
    sweep->add_option("--lambda-min", lambda_min_s, "comma list of lambda_min values");
    sweep->add_option("--lambda-max", lambda_max_s, "comma list of lambda_max values");
    sweep->add_option("--n-max", n_max_s, "comma list of N_max values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfigError;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, seed, out_dir);
        if (train->parsed()) return cmd_train(config_path, seed, out_dir, dump_parts);
        if (eval->parsed()) return cmd_eval(data_path, dumps_dir, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, seed, out_dir);
        if (sweep->parsed())
            return cmd_sweep(config_path, seed, out_dir, theta_s, theta_agg_s, lambda_min_s,
                             lambda_max_s, n_max_s);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
