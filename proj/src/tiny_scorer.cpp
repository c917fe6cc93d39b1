#include "lanemap/tiny_scorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "lanemap/error.hpp"
#include "lanemap/losses.hpp"

namespace lanemap {

template <class T>
Mlp<T>::Mlp(int inputs, int hidden, int classes, std::uint64_t seed)
    : inputs_(inputs), hidden_(hidden), classes_(classes) {
    if (inputs < 1 || hidden < 1 || classes < 1) {
        throw ValidationError("perceptron dimensions must be positive");
    }
    params_.assign(b2_offset() + static_cast<std::size_t>(classes_) + 2, T(0));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w1_dist(-std::sqrt(6.0 / inputs), std::sqrt(6.0 / inputs));
    for (std::size_t i = w1_offset(); i < b1_offset(); ++i) {
        params_[i] = static_cast<T>(w1_dist(rng));
    }
    std::uniform_real_distribution<double> w2_dist(-std::sqrt(1.0 / hidden), std::sqrt(1.0 / hidden));
    const int outs = classes_ + 2;
    for (int h = 0; h < hidden_; ++h) {
        for (int o = 0; o < classes_; ++o) {
            params_[w2_offset() + static_cast<std::size_t>(h) * outs + o] = static_cast<T>(w2_dist(rng));
        }
    }
}

template <class T>
void Mlp<T>::forward(std::span<const T> x, Output& out) const {
    if (x.size() != static_cast<std::size_t>(inputs_)) {
        throw ValidationError("perceptron input has " + std::to_string(x.size()) + " values, expected " +
                              std::to_string(inputs_));
    }
    out.hidden.assign(params_.begin() + static_cast<std::ptrdiff_t>(b1_offset()),
                      params_.begin() + static_cast<std::ptrdiff_t>(w2_offset()));
    T* h = out.hidden.data();
    const T* w1 = params_.data() + w1_offset();
    for (int i = 0; i < inputs_; ++i) {
        const T xi = x[static_cast<std::size_t>(i)];
        if (xi == T(0)) continue;
        const T* row = w1 + static_cast<std::size_t>(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) {
            h[j] += xi * row[j];
        }
    }
    for (int j = 0; j < hidden_; ++j) {
        h[j] = std::max(h[j], T(0));
    }
    const int outs = classes_ + 2;
    out.out.assign(params_.begin() + static_cast<std::ptrdiff_t>(b2_offset()), params_.end());
    const T* w2 = params_.data() + w2_offset();
    for (int j = 0; j < hidden_; ++j) {
        if (h[j] == T(0)) continue;
        const T* row = w2 + static_cast<std::size_t>(j) * outs;
        for (int o = 0; o < outs; ++o) {
            out.out[static_cast<std::size_t>(o)] += h[j] * row[o];
        }
    }
}

template <class T>
std::vector<double> Mlp<T>::masked_logits(const Output& out, std::size_t valid, std::size_t candidate_slots) const {
    std::vector<double> logits(static_cast<std::size_t>(classes_));
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const bool padded = j < candidate_slots && j >= valid;
        logits[j] = padded ? -std::numeric_limits<double>::infinity() : static_cast<double>(out.out[j]);
    }
    return logits;
}

template <class T>
typename Mlp<T>::LossTerms Mlp<T>::loss(const Sample& s, double lambda1, double lambda2, std::vector<T>* grad,
                                        double scale) const {
    if (s.true_class >= static_cast<std::size_t>(classes_) ||
        (s.true_class < s.candidate_slots && s.true_class >= s.valid)) {
        throw ValidationError("true class points at a padded or missing slot");
    }
    Output o;
    forward(s.input, o);
    const std::vector<double> logits = masked_logits(o, s.valid, s.candidate_slots);
    LossTerms terms;
    terms.l_cls = softmax_cross_entropy(logits, s.true_class);
    std::array<double, 2> e{};
    for (int j = 0; j < 2; ++j) {
        e[j] = static_cast<double>(o.out[static_cast<std::size_t>(classes_ + j)]) - static_cast<double>(s.location_target[j]);
        const double a = std::abs(e[j]);
        terms.l_reg += a < 1.0 ? 0.5 * a * a : a - 0.5;
    }
    if (grad == nullptr) {
        return terms;
    }

    const int outs = classes_ + 2;
    std::vector<T> dout(static_cast<std::size_t>(outs));
    const std::vector<double> probs = softmax(logits);
    for (int c = 0; c < classes_; ++c) {
        const double target = static_cast<std::size_t>(c) == s.true_class ? 1.0 : 0.0;
        dout[static_cast<std::size_t>(c)] = static_cast<T>(scale * lambda1 * (probs[static_cast<std::size_t>(c)] - target));
    }
    for (int j = 0; j < 2; ++j) {
        const double g = std::abs(e[j]) < 1.0 ? e[j] : (e[j] > 0 ? 1.0 : -1.0);
        dout[static_cast<std::size_t>(classes_ + j)] = static_cast<T>(scale * lambda2 * g);
    }

    T* gp = grad->data();
    for (int o2 = 0; o2 < outs; ++o2) {
        gp[b2_offset() + static_cast<std::size_t>(o2)] += dout[static_cast<std::size_t>(o2)];
    }
    std::vector<T> dh(static_cast<std::size_t>(hidden_), T(0));
    const T* w2 = params_.data() + w2_offset();
    for (int j = 0; j < hidden_; ++j) {
        const T hj = o.hidden[static_cast<std::size_t>(j)];
        if (hj == T(0)) continue;  // inactive unit: no gradient through ReLU
        T* grow = gp + w2_offset() + static_cast<std::size_t>(j) * outs;
        const T* wrow = w2 + static_cast<std::size_t>(j) * outs;
        T acc = 0;
        for (int o2 = 0; o2 < outs; ++o2) {
            grow[o2] += hj * dout[static_cast<std::size_t>(o2)];
            acc += wrow[o2] * dout[static_cast<std::size_t>(o2)];
        }
        dh[static_cast<std::size_t>(j)] = acc;
    }
    for (int j = 0; j < hidden_; ++j) {
        gp[b1_offset() + static_cast<std::size_t>(j)] += dh[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < inputs_; ++i) {
        const T xi = s.input[static_cast<std::size_t>(i)];
        if (xi == T(0)) continue;
        T* grow = gp + w1_offset() + static_cast<std::size_t>(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) {
            grow[j] += xi * dh[static_cast<std::size_t>(j)];
        }
    }
    return terms;
}

template class Mlp<float>;
template class Mlp<double>;

TinyScorer::TinyScorer(ScorerShape shape, std::uint64_t seed)
    : shape_(shape), mlp_(shape.input_dim(), shape.hidden, shape.num_classes(), seed) {}

TinyScorer::TinyScorer(ScorerShape shape, Mlp<float> mlp) : shape_(shape), mlp_(std::move(mlp)) {
    if (mlp_.inputs() != shape_.input_dim() || mlp_.hidden() != shape_.hidden ||
        mlp_.classes() != shape_.num_classes()) {
        throw ValidationError("perceptron does not match scorer shape");
    }
}

MatchDecision TinyScorer::score(const MatchContext& ctx) const {
    if (ctx.cfg.crop_size != shape_.crop_size || ctx.cfg.k != shape_.k || ctx.cfg.c_feat != shape_.c_feat ||
        ctx.cfg.use_terminal_class != shape_.terminal) {
        throw ValidationError("match config does not match the trained scorer shape");
    }
    const std::size_t valid = ctx.candidates.neighbors.size();
    if (valid == 0 && !shape_.terminal) {
        throw ValidationError("no candidates and the terminal class is disabled");
    }
    Mlp<float>::Output out;
    mlp_.forward(ctx.patch.grid.data(), out);
    MatchDecision d;
    d.class_probs = softmax(mlp_.masked_logits(out, valid, ctx.candidates.k()));
    const double extent = static_cast<double>(shape_.crop_size) * ctx.cfg.feature_stride;
    const PixelPoint anchor = ctx.vertices[ctx.candidates.anchor];
    const auto cls = static_cast<std::size_t>(shape_.num_classes());
    d.location = {anchor.x + out.out[cls] * extent, anchor.y + out.out[cls + 1] * extent};
    return d;
}

namespace {

constexpr std::uint32_t kMagic = 0x53544d4c;  // "LMTS" little-endian
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int ch = in.get();
        if (ch == std::char_traits<char>::eof()) {
            throw ParseError("truncated scorer parameter file");
        }
        v |= static_cast<std::uint32_t>(ch & 0xFF) << (8 * i);
    }
    return v;
}

Mlp<float>::Sample as_sample(const TrainingExample& ex, const ScorerShape& shape) {
    if (ex.input.size() != static_cast<std::size_t>(shape.input_dim())) {
        throw ValidationError("training example has wrong input size");
    }
    return {ex.input, ex.valid_candidates, static_cast<std::size_t>(shape.k), ex.true_class, ex.location_target};
}

}  // namespace

void TinyScorer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (std::uint32_t v : {kMagic, kVersion, static_cast<std::uint32_t>(shape_.crop_size),
                            static_cast<std::uint32_t>(shape_.k), static_cast<std::uint32_t>(shape_.c_feat),
                            static_cast<std::uint32_t>(shape_.terminal ? 1 : 0),
                            static_cast<std::uint32_t>(shape_.hidden),
                            static_cast<std::uint32_t>(mlp_.params().size())}) {
        put_u32(out, v);
    }
    for (float p : mlp_.params()) {
        put_u32(out, std::bit_cast<std::uint32_t>(p));
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

TinyScorer TinyScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    if (get_u32(in) != kMagic || get_u32(in) != kVersion) {
        throw ParseError(path.string() + " is not a scorer parameter file");
    }
    ScorerShape shape;
    shape.crop_size = static_cast<int>(get_u32(in));
    shape.k = static_cast<int>(get_u32(in));
    shape.c_feat = static_cast<int>(get_u32(in));
    shape.terminal = get_u32(in) != 0;
    shape.hidden = static_cast<int>(get_u32(in));
    const std::uint32_t count = get_u32(in);
    Mlp<float> mlp(shape.input_dim(), shape.hidden, shape.num_classes(), 0);
    if (count != mlp.params().size()) {
        throw ParseError("parameter count does not match header shape");
    }
    for (float& p : mlp.params()) {
        p = std::bit_cast<float>(get_u32(in));
    }
    return TinyScorer(shape, std::move(mlp));
}

EpochLog evaluate_examples(const TinyScorer& scorer, const ExampleSource& data, const TrainConfig& cfg) {
    EpochLog row;
    TrainingExample ex;
    for (std::size_t i = 0; i < data.size(); ++i) {
        data.fill(i, ex);
        const auto terms = scorer.mlp().loss(as_sample(ex, scorer.shape()), cfg.lambda1, cfg.lambda2);
        row.l_cls += terms.l_cls;
        row.l_reg += terms.l_reg;
    }
    if (data.size() > 0) {
        row.l_cls /= static_cast<double>(data.size());
        row.l_reg /= static_cast<double>(data.size());
    }
    row.total = cfg.lambda1 * row.l_cls + cfg.lambda2 * row.l_reg;
    return row;
}

TinyScorer tiny_scorer_train(const ExampleSource& data, const ScorerShape& shape, const TrainConfig& cfg,
                             std::vector<EpochLog>* log) {
    if (data.size() == 0) {
        throw ValidationError("cannot train on an empty dataset");
    }
    if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) {
        throw ValidationError("invalid training configuration");
    }
    TinyScorer scorer(shape, cfg.seed);
    std::vector<float>& params = scorer.mlp().params();
    std::vector<float> grad(params.size(), 0.0f);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    TrainingExample ex;
    const auto lr = static_cast<float>(cfg.lr);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0f);
            for (std::size_t b = start; b < stop; ++b) {
                data.fill(order[b], ex);
                scorer.mlp().loss(as_sample(ex, shape), cfg.lambda1, cfg.lambda2, &grad, scale);
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                params[i] -= lr * grad[i];
            }
        }
        if (log != nullptr) {
            EpochLog row = evaluate_examples(scorer, data, cfg);
            row.epoch = epoch;
            log->push_back(row);
        }
    }
    return scorer;
}

std::string format_training_log(std::span<const EpochLog> log) {
    std::ostringstream out;
    out.precision(9);
    out << "epoch,l_cls,l_reg,total\n";
    for (const EpochLog& row : log) {
        out << row.epoch << ',' << row.l_cls << ',' << row.l_reg << ',' << row.total << '\n';
    }
    return out.str();
}

}  // namespace lanemap
