#include "treenhance/evaluator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "treenhance/error.hpp"
#include "treenhance/ops.hpp"

namespace trenh {
namespace {

constexpr double kLogEps = 1e-12;

double relu6(double z) noexcept { return std::min(std::max(z, 0.0), 6.0); }
double relu6_grad(double z) noexcept { return (z > 0.0 && z < 6.0) ? 1.0 : 0.0; }

std::size_t conv_out(std::size_t n) noexcept { return (n + 1) / 2; }

struct Plane {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_) {}
    double& at(std::size_t ch, std::size_t y, std::size_t x) { return v[(ch * h + y) * w + x]; }
    double at(std::size_t ch, std::size_t y, std::size_t x) const { return v[(ch * h + y) * w + x]; }
};

struct Head {
    std::vector<double> pre;     // fc1 pre-activation
    std::vector<double> hidden;  // after ReLU6 and dropout
    std::vector<double> out;     // fc2 output
};

struct ForwardCache {
    std::vector<Plane> acts;  // acts[0] is the input, acts[i] the output of block i
    std::vector<Plane> pre;   // pre[i] is the pre-activation of block i+1
    std::vector<double> pooled;
    Head policy;
    Head value;
    std::vector<double> pi;
    double v = 0.5;
};

// Tensor storage order: conv{i}.weight, conv{i}.bias for each block, then
// policy.fc1/fc2 and value.fc1/fc2 weight and bias.
struct Layout {
    std::size_t blocks;
    std::size_t conv_w(std::size_t i) const { return 2 * i; }
    std::size_t conv_b(std::size_t i) const { return 2 * i + 1; }
    std::size_t head(bool policy, std::size_t fc, bool bias) const {
        return 2 * blocks + (policy ? 0 : 4) + 2 * fc + (bias ? 1 : 0);
    }
};

Plane to_input(const Image& img, std::size_t size) {
    const Image scaled =
        (img.height() == size && img.width() == size) ? img : resize(img, size, size);
    Plane p(3, size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            for (std::size_t c = 0; c < 3; ++c) p.at(c, y, x) = scaled.at(y, x, c) - 0.5;
        }
    }
    return p;
}

Plane conv_forward(const Plane& in, const Tensor& w, const Tensor& b) {
    const std::size_t cout = w.shape[0];
    Plane out(cout, conv_out(in.h), conv_out(in.w));
    for (std::size_t co = 0; co < cout; ++co) {
        double* dst = &out.v[co * out.h * out.w];
        std::fill(dst, dst + out.h * out.w, static_cast<double>(b.values[co]));
        for (std::size_t ci = 0; ci < in.c; ++ci) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double wk = w.values[((co * in.c + ci) * 3 + ky) * 3 + kx];
                    for (std::size_t oy = 0; oy < out.h; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                        const double* src = &in.v[(ci * in.h + static_cast<std::size_t>(iy)) * in.w];
                        double* row = dst + oy * out.w;
                        for (std::size_t ox = 0; ox < out.w; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                            row[ox] += wk * src[ix];
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients and returns the gradient w.r.t. the input.
Plane conv_backward(const Plane& in, const Plane& dout, const Tensor& w, std::vector<double>& dw,
                    std::vector<double>& db, bool need_input_grad) {
    Plane din;
    if (need_input_grad) din = Plane(in.c, in.h, in.w);
    for (std::size_t co = 0; co < dout.c; ++co) {
        const double* g = &dout.v[co * dout.h * dout.w];
        double bsum = 0.0;
        for (std::size_t i = 0; i < dout.h * dout.w; ++i) bsum += g[i];
        db[co] += bsum;
        for (std::size_t ci = 0; ci < in.c; ++ci) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const std::size_t widx = ((co * in.c + ci) * 3 + ky) * 3 + kx;
                    const double wk = w.values[widx];
                    double acc = 0.0;
                    for (std::size_t oy = 0; oy < dout.h; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                        const std::size_t src_off = (ci * in.h + static_cast<std::size_t>(iy)) * in.w;
                        const double* grow = g + oy * dout.w;
                        for (std::size_t ox = 0; ox < dout.w; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                            acc += grow[ox] * in.v[src_off + static_cast<std::size_t>(ix)];
                            if (need_input_grad) {
                                din.v[src_off + static_cast<std::size_t>(ix)] += wk * grow[ox];
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    return din;
}

std::vector<double> linear(const std::vector<double>& x, const Tensor& w, const Tensor& b) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b.values[r];
        for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(w.values[r * cols + c]) * x[c];
        y[r] = acc;
    }
    return y;
}

// dy -> accumulates dw, db; returns dx.
std::vector<double> linear_backward(const std::vector<double>& x, const std::vector<double>& dy,
                                    const Tensor& w, std::vector<double>& dw,
                                    std::vector<double>& db) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    std::vector<double> dx(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        db[r] += dy[r];
        for (std::size_t c = 0; c < cols; ++c) {
            dw[r * cols + c] += dy[r] * x[c];
            dx[c] += dy[r] * static_cast<double>(w.values[r * cols + c]);
        }
    }
    return dx;
}

Head head_forward(const std::vector<double>& pooled, const Tensor& w1, const Tensor& b1,
                  const Tensor& w2, const Tensor& b2, const std::vector<double>* mask) {
    Head h;
    h.pre = linear(pooled, w1, b1);
    h.hidden.resize(h.pre.size());
    for (std::size_t i = 0; i < h.pre.size(); ++i) {
        h.hidden[i] = relu6(h.pre[i]) * (mask && !mask->empty() ? (*mask)[i] : 1.0);
    }
    h.out = linear(h.hidden, w2, b2);
    return h;
}

ForwardCache run_forward(const EvaluatorParams& params, const Image& img,
                         const DropoutMasks* masks) {
    const Architecture& arch = params.arch;
    const Layout layout{arch.widths.size()};
    const auto& t = params.tensors;
    ForwardCache cache;
    cache.acts.push_back(to_input(img, arch.input_size));
    for (std::size_t i = 0; i < layout.blocks; ++i) {
        Plane z = conv_forward(cache.acts.back(), t[layout.conv_w(i)], t[layout.conv_b(i)]);
        Plane a(z.c, z.h, z.w);
        std::transform(z.v.begin(), z.v.end(), a.v.begin(), relu6);
        cache.pre.push_back(std::move(z));
        cache.acts.push_back(std::move(a));
    }
    const Plane& last = cache.acts.back();
    const std::size_t area = last.h * last.w;
    cache.pooled.assign(last.c, 0.0);
    for (std::size_t c = 0; c < last.c; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < area; ++i) s += last.v[c * area + i];
        cache.pooled[c] = s / static_cast<double>(area);
    }
    cache.policy = head_forward(cache.pooled, t[layout.head(true, 0, false)],
                                t[layout.head(true, 0, true)], t[layout.head(true, 1, false)],
                                t[layout.head(true, 1, true)], masks ? &masks->policy : nullptr);
    cache.value = head_forward(cache.pooled, t[layout.head(false, 0, false)],
                               t[layout.head(false, 0, true)], t[layout.head(false, 1, false)],
                               t[layout.head(false, 1, true)], masks ? &masks->value : nullptr);

    const auto& logits = cache.policy.out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    cache.pi.resize(logits.size());
    double z = 0.0;
    for (std::size_t a = 0; a < logits.size(); ++a) {
        cache.pi[a] = std::exp(logits[a] - mx);
        z += cache.pi[a];
    }
    for (double& p : cache.pi) p /= z;
    cache.v = 1.0 / (1.0 + std::exp(-cache.value.out[0]));
    return cache;
}

void head_backward(const std::vector<double>& pooled, const Head& h, const std::vector<double>& dout,
                   const std::vector<double>* mask, const EvaluatorParams& params,
                   const Layout& layout, bool policy, Gradients& grad,
                   std::vector<double>& dpooled) {
    const auto& t = params.tensors;
    const std::size_t w2 = layout.head(policy, 1, false), b2 = layout.head(policy, 1, true);
    const std::size_t w1 = layout.head(policy, 0, false), b1 = layout.head(policy, 0, true);
    std::vector<double> dhidden = linear_backward(h.hidden, dout, t[w2], grad[w2], grad[b2]);
    for (std::size_t i = 0; i < dhidden.size(); ++i) {
        const double m = (mask && !mask->empty()) ? (*mask)[i] : 1.0;
        dhidden[i] *= m * relu6_grad(h.pre[i]);
    }
    const auto dp = linear_backward(pooled, dhidden, t[w1], grad[w1], grad[b1]);
    for (std::size_t i = 0; i < dp.size(); ++i) dpooled[i] += dp[i];
}

std::vector<std::size_t> shape_of(std::initializer_list<std::size_t> dims) { return dims; }

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

class Reader {
public:
    Reader(std::vector<unsigned char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

    bool at_end() const noexcept { return pos_ >= buf_.size(); }

    void bytes(void* dst, std::size_t n, const std::string& what) {
        if (buf_.size() - pos_ < n) {
            throw Error(ErrorKind::TruncatedFile, path_ + ": truncated while reading " + what);
        }
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::uint32_t u32(const std::string& what) {
        unsigned char b[4];
        bytes(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    const std::string& path() const noexcept { return path_; }

private:
    std::vector<unsigned char> buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

EvaluatorOutput UniformEvaluator::evaluate(const Image&) const {
    return {std::vector<float>(num_actions_, 1.0f / static_cast<float>(num_actions_)), 0.5f};
}

nlohmann::json Architecture::to_json() const {
    return {{"architecture", "small_cnn"}, {"catalog", catalog},   {"num_actions", num_actions},
            {"input_size", input_size},    {"widths", widths},     {"hidden", hidden},
            {"dropout_p", dropout_p}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
    Architecture a;
    try {
        if (j.at("architecture").get<std::string>() != "small_cnn") {
            throw Error(ErrorKind::ShapeMismatch, "unsupported architecture '" +
                                                      j.at("architecture").get<std::string>() + "'");
        }
        a.catalog = j.at("catalog").get<std::string>();
        a.num_actions = j.at("num_actions").get<std::size_t>();
        a.input_size = j.at("input_size").get<std::size_t>();
        a.widths = j.at("widths").get<std::vector<std::size_t>>();
        a.hidden = j.at("hidden").get<std::size_t>();
        a.dropout_p = j.at("dropout_p").get<float>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ShapeMismatch, std::string("malformed model descriptor: ") + e.what());
    }
    if (a.widths.empty() || a.num_actions < 1 || a.input_size < 1 || a.hidden < 1 ||
        !(a.dropout_p >= 0.0f && a.dropout_p < 1.0f)) {
        throw Error(ErrorKind::ShapeMismatch, "model descriptor has invalid dimensions");
    }
    return a;
}

const Tensor& EvaluatorParams::tensor(std::string_view name) const {
    for (const Tensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw Error(ErrorKind::ShapeMismatch, "no tensor named " + std::string(name));
}

std::size_t EvaluatorParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.numel();
    return n;
}

std::vector<Tensor> expected_tensors(const Architecture& arch) {
    std::vector<Tensor> out;
    std::size_t cin = 3;
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
        const std::string prefix = "conv" + std::to_string(i + 1);
        out.push_back({prefix + ".weight", shape_of({arch.widths[i], cin, 3, 3}), {}});
        out.push_back({prefix + ".bias", shape_of({arch.widths[i]}), {}});
        cin = arch.widths[i];
    }
    for (const char* head : {"policy", "value"}) {
        const std::size_t outputs = std::string(head) == "policy" ? arch.num_actions : 1;
        out.push_back({std::string(head) + ".fc1.weight", shape_of({arch.hidden, cin}), {}});
        out.push_back({std::string(head) + ".fc1.bias", shape_of({arch.hidden}), {}});
        out.push_back({std::string(head) + ".fc2.weight", shape_of({outputs, arch.hidden}), {}});
        out.push_back({std::string(head) + ".fc2.bias", shape_of({outputs}), {}});
    }
    for (Tensor& t : out) {
        std::size_t n = 1;
        for (std::size_t d : t.shape) n *= d;
        t.values.assign(n, 0.0f);
    }
    return out;
}

EvaluatorParams init_params(const Architecture& arch, std::uint64_t seed) {
    EvaluatorParams params{arch, expected_tensors(arch)};
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params.tensors.size(); i += 2) {
        Tensor& w = params.tensors[i];
        Tensor& b = params.tensors[i + 1];
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < w.shape.size(); ++d) fan_in *= w.shape[d];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (float& v : w.values) v = static_cast<float>(dist(rng));
        for (float& v : b.values) v = static_cast<float>(dist(rng));
        // Output layers start at zero: uniform priors and a value of 0.5,
        // the same starting point as the evaluator-free search.
        if (w.name == "policy.fc2.weight" || w.name == "value.fc2.weight") {
            std::fill(w.values.begin(), w.values.end(), 0.0f);
            std::fill(b.values.begin(), b.values.end(), 0.0f);
        }
    }
    return params;
}

void validate(const EvaluatorParams& params) {
    const auto expected = expected_tensors(params.arch);
    if (expected.size() != params.tensors.size()) {
        throw Error(ErrorKind::ShapeMismatch,
                    "expected " + std::to_string(expected.size()) + " tensors, found " +
                        std::to_string(params.tensors.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const Tensor& have = params.tensors[i];
        if (have.name != expected[i].name || have.shape != expected[i].shape ||
            have.values.size() != expected[i].values.size()) {
            throw Error(ErrorKind::ShapeMismatch,
                        "tensor " + have.name + " does not match descriptor (expected " +
                            expected[i].name + ")");
        }
        for (float v : have.values) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::ShapeMismatch, "tensor " + have.name + " is not finite");
            }
        }
    }
}

void check_catalog(const EvaluatorParams& params, const Catalog& cat) {
    if (params.arch.num_actions != cat.size()) {
        throw Error(ErrorKind::CatalogMismatch,
                    "model has " + std::to_string(params.arch.num_actions) +
                        " actions but catalog '" + cat.name() + "' has " +
                        std::to_string(cat.size()));
    }
}

DropoutMasks DropoutMasks::sample(const Architecture& arch, std::mt19937_64& rng) {
    DropoutMasks m;
    if (arch.dropout_p <= 0.0f) return m;
    const double keep = 1.0 - static_cast<double>(arch.dropout_p);
    std::bernoulli_distribution bern(keep);
    m.policy.resize(arch.hidden);
    m.value.resize(arch.hidden);
    for (double& x : m.policy) x = bern(rng) ? 1.0 / keep : 0.0;
    for (double& x : m.value) x = bern(rng) ? 1.0 / keep : 0.0;
    return m;
}

EvaluatorOutput forward(const EvaluatorParams& params, const Image& img, bool training,
                        std::mt19937_64* rng) {
    DropoutMasks masks;
    if (training) {
        if (rng == nullptr) {
            throw Error(ErrorKind::InvalidArgument, "training forward pass needs an rng");
        }
        masks = DropoutMasks::sample(params.arch, *rng);
    }
    const ForwardCache cache = run_forward(params, img, training ? &masks : nullptr);
    EvaluatorOutput out;
    out.policy.resize(cache.pi.size());
    std::transform(cache.pi.begin(), cache.pi.end(), out.policy.begin(),
                   [](double p) { return static_cast<float>(p); });
    out.value = static_cast<float>(cache.v);
    return out;
}

double loss(const EvaluatorOutput& out, double target_r, std::span<const float> target_rho,
            double lambda) {
    if (target_rho.size() != out.policy.size()) {
        throw Error(ErrorKind::DimensionMismatch, "target policy length " +
                                                      std::to_string(target_rho.size()) +
                                                      " != " + std::to_string(out.policy.size()));
    }
    const double dv = target_r - out.value;
    double l = lambda * dv * dv;
    for (std::size_t a = 0; a < target_rho.size(); ++a) {
        l -= static_cast<double>(target_rho[a]) * std::log(static_cast<double>(out.policy[a]) + kLogEps);
    }
    return l;
}

Gradients zero_gradients(const EvaluatorParams& params) {
    Gradients g(params.tensors.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i].assign(params.tensors[i].numel(), 0.0);
    return g;
}

double loss_and_gradient(const EvaluatorParams& params, const Image& img, double target_r,
                         std::span<const float> target_rho, double lambda,
                         const DropoutMasks* masks, Gradients* grad) {
    if (target_rho.size() != params.arch.num_actions) {
        throw Error(ErrorKind::DimensionMismatch, "target policy length does not match model");
    }
    const ForwardCache cache = run_forward(params, img, masks);
    const double dv = target_r - cache.v;
    double l = lambda * dv * dv;
    for (std::size_t a = 0; a < cache.pi.size(); ++a) {
        l -= static_cast<double>(target_rho[a]) * std::log(cache.pi[a] + kLogEps);
    }
    if (grad == nullptr) return l;

    const Layout layout{params.arch.widths.size()};
    // d/dlogit_j of -sum_a rho_a log(pi_a + eps), exact in eps.
    std::vector<double> q(cache.pi.size());
    double qsum = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        q[a] = target_rho[a] * cache.pi[a] / (cache.pi[a] + kLogEps);
        qsum += q[a];
    }
    std::vector<double> dlogits(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) dlogits[j] = cache.pi[j] * qsum - q[j];
    const std::vector<double> du{-2.0 * lambda * dv * cache.v * (1.0 - cache.v)};

    std::vector<double> dpooled(cache.pooled.size(), 0.0);
    head_backward(cache.pooled, cache.policy, dlogits, masks ? &masks->policy : nullptr, params,
                  layout, true, *grad, dpooled);
    head_backward(cache.pooled, cache.value, du, masks ? &masks->value : nullptr, params, layout,
                  false, *grad, dpooled);

    const Plane& last = cache.acts.back();
    const std::size_t area = last.h * last.w;
    Plane dact(last.c, last.h, last.w);
    for (std::size_t c = 0; c < last.c; ++c) {
        for (std::size_t i = 0; i < area; ++i) {
            dact.v[c * area + i] = dpooled[c] / static_cast<double>(area);
        }
    }
    for (std::size_t i = layout.blocks; i-- > 0;) {
        const Plane& z = cache.pre[i];
        for (std::size_t k = 0; k < dact.v.size(); ++k) dact.v[k] *= relu6_grad(z.v[k]);
        const std::size_t wi = layout.conv_w(i), bi = layout.conv_b(i);
        dact = conv_backward(cache.acts[i], dact, params.tensors[wi], (*grad)[wi], (*grad)[bi],
                             i > 0);
    }
    return l;
}

Trainer::Trainer(EvaluatorParams& params, TrainConfig cfg)
    : params_(params),
      cfg_(cfg),
      rng_(cfg.seed),
      m_(zero_gradients(params)),
      v_(zero_gradients(params)) {
    if (!(cfg.lambda > 0.0) || cfg.learning_rate < 0.0 || cfg.weight_decay < 0.0 ||
        cfg.batch_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "invalid training configuration");
    }
}

double Trainer::step(std::span<const Triplet* const> batch) {
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "train step needs a non-empty batch");
    Gradients grad = zero_gradients(params_);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const DropoutMasks masks = DropoutMasks::sample(params_.arch, rng_);
        const double l = loss_and_gradient(params_, batch[i]->image, batch[i]->ret, batch[i]->rho,
                                           cfg_.lambda, &masks, &grad);
        if (!std::isfinite(l)) {
            throw Error(ErrorKind::NonFiniteLoss,
                        "non-finite loss at batch index " + std::to_string(i));
        }
        total += l;
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    ++t_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    for (std::size_t ti = 0; ti < params_.tensors.size(); ++ti) {
        auto& values = params_.tensors[ti].values;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = grad[ti][k] * scale;
            double theta = values[k];
            theta -= lr * cfg_.weight_decay * theta;
            m_[ti][k] = b1 * m_[ti][k] + (1.0 - b1) * g;
            v_[ti][k] = b2 * v_[ti][k] + (1.0 - b2) * g * g;
            theta -= lr * (m_[ti][k] / bc1) / (std::sqrt(v_[ti][k] / bc2) + eps);
            values[k] = static_cast<float>(theta);
        }
    }
    return total * scale;
}

double Trainer::evaluate_loss(std::span<const Triplet* const> batch) const {
    if (batch.empty()) return 0.0;
    double total = 0.0;
    for (const Triplet* t : batch) {
        total += loss_and_gradient(params_, t->image, t->ret, t->rho, cfg_.lambda, nullptr, nullptr);
    }
    return total / static_cast<double>(batch.size());
}

void save_params(const EvaluatorParams& params, const std::filesystem::path& path) {
    validate(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(kModelMagic, 4);
    write_u32(out, kModelVersion);
    const std::string descriptor = params.arch.to_json().dump();
    write_u32(out, static_cast<std::uint32_t>(descriptor.size()));
    out.write(descriptor.data(), static_cast<std::streamsize>(descriptor.size()));
    for (const Tensor& t : params.tensors) {
        write_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
        for (float v : t.values) write_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

EvaluatorParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for reading");
    Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}, path.string());
    char magic[4] = {};
    try {
        r.bytes(magic, 4, "magic");
    } catch (const Error&) {
        throw Error(ErrorKind::BadMagic, path.string() + ": not a model file (bad magic)");
    }
    if (!std::equal(magic, magic + 4, kModelMagic)) {
        throw Error(ErrorKind::BadMagic, path.string() + ": not a model file (bad magic)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kModelVersion) {
        throw Error(ErrorKind::VersionMismatch, path.string() + ": model format version " +
                                                    std::to_string(version) + ", expected " +
                                                    std::to_string(kModelVersion));
    }
    std::string descriptor(r.u32("descriptor length"), '\0');
    r.bytes(descriptor.data(), descriptor.size(), "descriptor");
    nlohmann::json dj;
    try {
        dj = nlohmann::json::parse(descriptor);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": bad descriptor: " + e.what());
    }
    EvaluatorParams params{Architecture::from_json(dj), {}};
    const auto expected = expected_tensors(params.arch);
    for (const Tensor& want : expected) {
        if (r.at_end()) {
            throw Error(ErrorKind::TruncatedFile, path.string() + ": missing tensor " + want.name);
        }
        Tensor t;
        t.name.resize(r.u32("tensor name length"));
        if (t.name.size() > 4096) {
            throw Error(ErrorKind::TruncatedFile, path.string() + ": corrupt tensor name length");
        }
        r.bytes(t.name.data(), t.name.size(), "tensor name");
        const std::uint32_t rank = r.u32("rank of tensor " + t.name);
        if (rank > 8) {
            throw Error(ErrorKind::TruncatedFile, path.string() + ": corrupt rank for tensor " + t.name);
        }
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(r.u32("dims of tensor " + t.name));
            numel *= t.shape.back();
        }
        if (t.name != want.name || t.shape != want.shape) {
            if (t.name == want.name && t.name.starts_with("policy.fc2")) {
                throw Error(ErrorKind::CatalogMismatch,
                            path.string() + ": tensor " + t.name + " disagrees with descriptor size " +
                                std::to_string(params.arch.num_actions));
            }
            throw Error(ErrorKind::ShapeMismatch,
                        path.string() + ": tensor " + t.name + " does not match descriptor (expected " +
                            want.name + ")");
        }
        std::vector<unsigned char> raw(numel * 4);
        r.bytes(raw.data(), raw.size(), "data of tensor " + t.name);
        t.values.resize(numel);
        for (std::size_t k = 0; k < numel; ++k) {
            const unsigned char* b = &raw[4 * k];
            t.values[k] = std::bit_cast<float>(
                static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24));
        }
        params.tensors.push_back(std::move(t));
    }
    if (!r.at_end()) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": trailing bytes after last tensor");
    }
    validate(params);
    return params;
}

}  // namespace trenh
