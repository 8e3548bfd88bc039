#include "cleanset/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cleanset/errors.hpp"

namespace cleanset {

double LabeledDataset::noise_rate() const {
    if (size() == 0) return 0.0;
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < size(); ++i)
        if (true_labels[i] != noisy_labels[i]) ++flipped;
    return static_cast<double>(flipped) / static_cast<double>(size());
}

void LabeledDataset::validate() const {
    const std::size_t n = size();
    if (true_labels.size() != n || noisy_labels.size() != n || ids.size() != n)
        throw DimensionError("dataset: field lengths differ");
    if (class_count < 2) throw ConfigError("dataset: class_count must be >= 2");
    for (std::size_t i = 0; i < n; ++i) {
        if (true_labels[i] < 0 || true_labels[i] >= class_count ||
            noisy_labels[i] < 0 || noisy_labels[i] >= class_count)
            throw ConfigError("dataset: label out of range at sample " + std::to_string(i));
    }
    if (!features.all_finite()) throw NumericError("dataset: non-finite feature");
}

void write_dataset(const std::string& path, const LabeledDataset& ds) {
    ds.validate();
    std::ofstream os(path);
    if (!os) throw ConfigError("dataset: cannot open for writing: " + path);
    os << ds.size() << " " << ds.features.cols << " " << ds.class_count << "\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.ids[i];
        for (std::size_t j = 0; j < ds.features.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
            os << ", " << buf;
        }
        os << ", " << ds.true_labels[i] << ", " << ds.noisy_labels[i] << "\n";
    }
    if (!os) throw ConfigError("dataset: write failed: " + path);
}

LabeledDataset read_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("dataset: cannot open: " + path);
    std::size_t n = 0, d = 0;
    int c = 0;
    if (!(is >> n >> d >> c)) throw ConfigError("dataset: malformed header: " + path);
    std::string rest;
    std::getline(is, rest);

    LabeledDataset ds;
    ds.features = Matrix(n, d);
    ds.true_labels.resize(n);
    ds.noisy_labels.resize(n);
    ds.ids.resize(n);
    ds.class_count = c;
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line))
            throw ConfigError("dataset: truncated at row " + std::to_string(i));
        std::stringstream ss(line);
        char comma;
        if (!(ss >> ds.ids[i])) throw ConfigError("dataset: bad id at row " + std::to_string(i));
        for (std::size_t j = 0; j < d; ++j) {
            if (!(ss >> comma >> ds.features(i, j)))
                throw ConfigError("dataset: bad feature at row " + std::to_string(i));
        }
        if (!(ss >> comma >> ds.true_labels[i] >> comma >> ds.noisy_labels[i]))
            throw ConfigError("dataset: bad labels at row " + std::to_string(i));
    }
    ds.validate();
    return ds;
}

}  // namespace cleanset
