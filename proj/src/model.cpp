#include "cleanset/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cleanset/errors.hpp"

namespace cleanset {

namespace {

LinearLayer init_layer(std::size_t out, std::size_t in, Rng& rng) {
    LinearLayer l;
    l.weight = Matrix(out, in);
    double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : l.weight.data) w = scale * rng.gaussian();
    l.bias.assign(out, 0.0);
    return l;
}

LinearLayer zero_layer(std::size_t out, std::size_t in) {
    LinearLayer l;
    l.weight = Matrix(out, in, 0.0);
    l.bias.assign(out, 0.0);
    return l;
}

bool layer_eq(const LinearLayer& a, const LinearLayer& b) {
    return a.weight.rows == b.weight.rows && a.weight.cols == b.weight.cols &&
           a.weight.data == b.weight.data && a.bias == b.bias;
}

// y = x * W^T + b, row-wise
Matrix affine(const Matrix& x, const LinearLayer& l) {
    if (x.cols != l.weight.cols) throw DimensionError("affine: input width mismatch");
    Matrix y = matmul_nt(x, l.weight);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += l.bias[j];
    return y;
}

void relu_inplace(Matrix& m) {
    for (double& v : m.data) v = v > 0.0 ? v : 0.0;
}

void accumulate_layer_grads(const Matrix& dy, const Matrix& x, LinearLayer& g) {
    Matrix dw = matmul_tn(dy, x);  // out x in
    for (std::size_t i = 0; i < dw.data.size(); ++i) g.weight.data[i] += dw.data[i];
    for (std::size_t i = 0; i < dy.rows; ++i)
        for (std::size_t j = 0; j < dy.cols; ++j) g.bias[j] += dy(i, j);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (std::size_t i = 0; i < p.rows; ++i) softmax_row_inplace(p.row(i));
    return p;
}

}  // namespace

bool ModelParams::operator==(const ModelParams& o) const {
    if (extractor.size() != o.extractor.size()) return false;
    for (std::size_t i = 0; i < extractor.size(); ++i)
        if (!layer_eq(extractor[i], o.extractor[i])) return false;
    return layer_eq(head1, o.head1) && layer_eq(head2, o.head2);
}

void Gradients::scale(double s) {
    for (auto& l : extractor) {
        for (double& v : l.weight.data) v *= s;
        for (double& v : l.bias) v *= s;
    }
    for (auto* l : {&head1, &head2}) {
        for (double& v : l->weight.data) v *= s;
        for (double& v : l->bias) v *= s;
    }
}

bool Gradients::all_finite() const {
    auto ok = [](const LinearLayer& l) {
        if (!l.weight.all_finite()) return false;
        for (double v : l.bias)
            if (!std::isfinite(v)) return false;
        return true;
    };
    for (const auto& l : extractor)
        if (!ok(l)) return false;
    return ok(head1) && ok(head2);
}

Gradients zeros_like(const ModelParams& model) {
    Gradients g;
    for (const auto& l : model.extractor)
        g.extractor.push_back(zero_layer(l.weight.rows, l.weight.cols));
    g.head1 = zero_layer(model.head1.weight.rows, model.head1.weight.cols);
    g.head2 = zero_layer(model.head2.weight.rows, model.head2.weight.cols);
    return g;
}

ModelParams make_mlp_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           std::size_t feature_dim, std::size_t class_count, Rng& init_rng,
                           Rng& head2_rng) {
    if (class_count < 2) throw ConfigError("model: class_count must be >= 2");
    ModelParams m;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden) {
        m.extractor.push_back(init_layer(h, prev, init_rng));
        prev = h;
    }
    m.extractor.push_back(init_layer(feature_dim, prev, init_rng));
    m.head1 = init_layer(class_count, feature_dim, init_rng);
    m.head2 = init_layer(class_count, feature_dim, head2_rng);
    return m;
}

ForwardResult forward(const ModelParams& model, const Matrix& batch) {
    return forward_cached(model, batch).out;
}

ForwardCache forward_cached(const ModelParams& model, const Matrix& batch) {
    if (batch.cols != model.input_dim()) throw DimensionError("forward: batch width != input dim");
    ForwardCache c;
    c.input = batch;
    const Matrix* x = &c.input;
    for (std::size_t i = 0; i + 1 < model.extractor.size(); ++i) {
        Matrix h = affine(*x, model.extractor[i]);
        relu_inplace(h);
        c.activations.push_back(std::move(h));
        x = &c.activations.back();
    }
    c.out.features = affine(*x, model.extractor.back());
    c.out.logits1 = affine(c.out.features, model.head1);
    c.out.logits2 = affine(c.out.features, model.head2);
    c.out.probs1 = softmax_rows(c.out.logits1);
    c.out.probs2 = softmax_rows(c.out.logits2);
    return c;
}

void backward(const ModelParams& model, const ForwardCache& cache, const Matrix& dlogits1,
              const Matrix& dlogits2, ParamGroup group, Gradients& grads) {
    const Matrix& feat = cache.out.features;
    if (!dlogits1.same_shape(cache.out.logits1) || !dlogits2.same_shape(cache.out.logits2))
        throw DimensionError("backward: dlogits shape mismatch");

    if (group != ParamGroup::ExtractorOnly) {
        accumulate_layer_grads(dlogits1, feat, grads.head1);
        accumulate_layer_grads(dlogits2, feat, grads.head2);
    }
    if (group == ParamGroup::HeadsOnly) return;

    // dFeatures = dlogits1 * W_h1 + dlogits2 * W_h2
    Matrix dfeat = matmul(dlogits1, model.head1.weight);
    Matrix d2 = matmul(dlogits2, model.head2.weight);
    for (std::size_t i = 0; i < dfeat.data.size(); ++i) dfeat.data[i] += d2.data[i];

    // Back through the extractor stack.
    Matrix dy = std::move(dfeat);
    for (std::size_t li = model.extractor.size(); li-- > 0;) {
        const Matrix& input = li == 0 ? cache.input : cache.activations[li - 1];
        accumulate_layer_grads(dy, input, grads.extractor[li]);
        if (li == 0) break;
        Matrix dx = matmul(dy, model.extractor[li].weight);
        // ReLU mask of the producing layer's output.
        const Matrix& act = cache.activations[li - 1];
        for (std::size_t i = 0; i < dx.data.size(); ++i)
            if (act.data[i] <= 0.0) dx.data[i] = 0.0;
        dy = std::move(dx);
    }
}

OptimState make_optim(const ModelParams& model, double lr, double momentum,
                      double weight_decay) {
    if (lr < 0.0 || momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0)
        throw ConfigError("optimizer: invalid hyperparameters");
    OptimState o;
    o.momentum = zeros_like(model);
    o.learning_rate = lr;
    o.momentum_coef = momentum;
    o.weight_decay = weight_decay;
    return o;
}

namespace {

void step_layer(LinearLayer& p, LinearLayer& buf, const LinearLayer& g, double lr, double mom,
                double wd) {
    for (std::size_t i = 0; i < p.weight.data.size(); ++i) {
        buf.weight.data[i] = mom * buf.weight.data[i] + g.weight.data[i];
        // decay applied to weights only, outside the momentum buffer
        p.weight.data[i] -= lr * (buf.weight.data[i] + wd * p.weight.data[i]);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
        buf.bias[i] = mom * buf.bias[i] + g.bias[i];
        p.bias[i] -= lr * buf.bias[i];
    }
}

}  // namespace

void sgd_step(ModelParams& model, OptimState& optim, const Gradients& grads, ParamGroup mask) {
    if (!grads.all_finite()) throw NumericError("sgd_step: non-finite gradient");
    if (mask != ParamGroup::HeadsOnly) {
        for (std::size_t i = 0; i < model.extractor.size(); ++i)
            step_layer(model.extractor[i], optim.momentum.extractor[i], grads.extractor[i],
                       optim.learning_rate, optim.momentum_coef, optim.weight_decay);
    }
    if (mask != ParamGroup::ExtractorOnly) {
        step_layer(model.head1, optim.momentum.head1, grads.head1, optim.learning_rate,
                   optim.momentum_coef, optim.weight_decay);
        step_layer(model.head2, optim.momentum.head2, grads.head2, optim.learning_rate,
                   optim.momentum_coef, optim.weight_decay);
    }
}

// ---- checkpoint --------------------------------------------------------

namespace {

constexpr std::uint32_t kMagic = 0x4353434bu;  // "KCSC"
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
void write_doubles(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}
std::vector<double> read_doubles(std::istream& is) {
    std::vector<double> v(read_u64(is));
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    return v;
}
void write_layer(std::ostream& os, const LinearLayer& l) {
    write_u64(os, l.weight.rows);
    write_u64(os, l.weight.cols);
    write_doubles(os, l.weight.data);
    write_doubles(os, l.bias);
}
LinearLayer read_layer(std::istream& is) {
    LinearLayer l;
    l.weight.rows = read_u64(is);
    l.weight.cols = read_u64(is);
    l.weight.data = read_doubles(is);
    l.bias = read_doubles(is);
    return l;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model, const OptimState& optim) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("checkpoint: cannot open for writing: " + path);
    std::uint32_t header[2] = {kMagic, kVersion};
    os.write(reinterpret_cast<const char*>(header), sizeof(header));
    write_u64(os, model.extractor.size());
    for (const auto& l : model.extractor) write_layer(os, l);
    write_layer(os, model.head1);
    write_layer(os, model.head2);
    for (const auto& l : optim.momentum.extractor) write_layer(os, l);
    write_layer(os, optim.momentum.head1);
    write_layer(os, optim.momentum.head2);
    double hp[3] = {optim.learning_rate, optim.momentum_coef, optim.weight_decay};
    os.write(reinterpret_cast<const char*>(hp), sizeof(hp));
    if (!os) throw ConfigError("checkpoint: write failed: " + path);
}

void load_checkpoint(const std::string& path, ModelParams& model, OptimState& optim) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("checkpoint: cannot open: " + path);
    std::uint32_t header[2] = {0, 0};
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    if (header[0] != kMagic || header[1] != kVersion)
        throw ConfigError("checkpoint: bad magic or version: " + path);
    std::size_t n = read_u64(is);
    model.extractor.clear();
    for (std::size_t i = 0; i < n; ++i) model.extractor.push_back(read_layer(is));
    model.head1 = read_layer(is);
    model.head2 = read_layer(is);
    optim.momentum.extractor.clear();
    for (std::size_t i = 0; i < n; ++i) optim.momentum.extractor.push_back(read_layer(is));
    optim.momentum.head1 = read_layer(is);
    optim.momentum.head2 = read_layer(is);
    double hp[3];
    is.read(reinterpret_cast<char*>(hp), sizeof(hp));
    if (!is) throw ConfigError("checkpoint: truncated file: " + path);
    optim.learning_rate = hp[0];
    optim.momentum_coef = hp[1];
    optim.weight_decay = hp[2];
}

// ---- loss terms --------------------------------------------------------

LossGrad cross_entropy_loss(const ForwardResult& fwd, const Matrix& targets) {
    if (!targets.same_shape(fwd.probs1)) throw DimensionError("cross_entropy: target shape");
    const double n = static_cast<double>(targets.rows);
    LossGrad lg;
    lg.dlogits1 = Matrix(targets.rows, targets.cols);
    lg.dlogits2 = Matrix(targets.rows, targets.cols);
    double loss = 0.0;
    constexpr double eps = 1e-12;
    for (std::size_t i = 0; i < targets.rows; ++i) {
        for (std::size_t j = 0; j < targets.cols; ++j) {
            double t = targets(i, j);
            if (t > 0.0) {
                loss -= t * (std::log(fwd.probs1(i, j) + eps) + std::log(fwd.probs2(i, j) + eps));
            }
            lg.dlogits1(i, j) = (fwd.probs1(i, j) - t) / (2.0 * n);
            lg.dlogits2(i, j) = (fwd.probs2(i, j) - t) / (2.0 * n);
        }
    }
    lg.value = loss / (2.0 * n);
    if (!std::isfinite(lg.value)) throw NumericError("cross_entropy: non-finite loss");
    return lg;
}

void softmax_backward_row(std::span<const double> probs, std::span<const double> dprobs,
                          std::span<double> dlogits) {
    double inner = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) inner += dprobs[j] * probs[j];
    for (std::size_t j = 0; j < probs.size(); ++j) dlogits[j] = probs[j] * (dprobs[j] - inner);
}

LossGrad squared_error_loss(const ForwardResult& fwd, const Matrix& targets) {
    if (!targets.same_shape(fwd.probs1)) throw DimensionError("squared_error: target shape");
    const double n = static_cast<double>(targets.rows);
    LossGrad lg;
    lg.dlogits1 = Matrix(targets.rows, targets.cols);
    lg.dlogits2 = Matrix(targets.rows, targets.cols);
    double loss = 0.0;
    std::vector<double> dprobs(targets.cols);
    for (std::size_t i = 0; i < targets.rows; ++i) {
        for (const auto& [probs, dlogits] :
             {std::pair{&fwd.probs1, &lg.dlogits1}, std::pair{&fwd.probs2, &lg.dlogits2}}) {
            for (std::size_t j = 0; j < targets.cols; ++j) {
                double d = (*probs)(i, j) - targets(i, j);
                loss += d * d;
                dprobs[j] = 2.0 * d / (2.0 * n);
            }
            softmax_backward_row(probs->row(i), dprobs, dlogits->row(i));
        }
    }
    lg.value = loss / (2.0 * n);
    if (!std::isfinite(lg.value)) throw NumericError("squared_error: non-finite loss");
    return lg;
}

double discrepancy(std::span<const double> p1, std::span<const double> p2) {
    if (p1.size() != p2.size()) throw DimensionError("discrepancy: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) d += std::abs(p1[i] - p2[i]);
    return d;
}

LossGrad weighted_discrepancy_loss(const ForwardResult& fwd,
                                   const std::vector<double>& sample_weights) {
    const std::size_t n = fwd.probs1.rows;
    const std::size_t c = fwd.probs1.cols;
    if (sample_weights.size() != n) throw DimensionError("weighted_discrepancy: weight count");
    LossGrad lg;
    lg.dlogits1 = Matrix(n, c);
    lg.dlogits2 = Matrix(n, c);
    double loss = 0.0;
    std::vector<double> dp(c);
    for (std::size_t i = 0; i < n; ++i) {
        double w = sample_weights[i];
        loss += w * discrepancy(fwd.probs1.row(i), fwd.probs2.row(i));
        for (std::size_t j = 0; j < c; ++j) {
            double diff = fwd.probs1(i, j) - fwd.probs2(i, j);
            dp[j] = w * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / static_cast<double>(n);
        }
        softmax_backward_row(fwd.probs1.row(i), dp, lg.dlogits1.row(i));
        for (double& v : dp) v = -v;
        softmax_backward_row(fwd.probs2.row(i), dp, lg.dlogits2.row(i));
    }
    lg.value = loss / static_cast<double>(n);
    if (!std::isfinite(lg.value)) throw NumericError("weighted_discrepancy: non-finite loss");
    return lg;
}

}  // namespace cleanset
