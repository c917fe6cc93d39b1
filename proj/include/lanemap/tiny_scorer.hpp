#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lanemap/matcher.hpp"

namespace lanemap {

// Two-layer perceptron: inputs -> hidden (ReLU) -> classes logits + 2
// location outputs. Parameters are one flat vector [w1 | b1 | w2 | b2] with
// w1 laid out input-major (inputs x hidden) and w2 hidden-major
// (hidden x (classes + 2)).
template <class T>
class Mlp {
public:
    Mlp() = default;
    Mlp(int inputs, int hidden, int classes, std::uint64_t seed);

    struct Sample {
        std::span<const T> input;
        std::size_t valid = 0;       // leading candidate slots that are real
        std::size_t candidate_slots = 0;
        std::size_t true_class = 0;
        std::array<T, 2> location_target{};
    };

    struct Output {
        std::vector<T> hidden;  // post-activation
        std::vector<T> out;     // classes logits then 2 location values
    };

    struct LossTerms {
        double l_cls = 0.0;
        double l_reg = 0.0;
    };

    int inputs() const { return inputs_; }
    int hidden() const { return hidden_; }
    int classes() const { return classes_; }

    void forward(std::span<const T> x, Output& out) const;

    // Per-sample cross-entropy over masked logits and smooth-L1 on the
    // location. When grad is non-null, adds scale * d(lambda1*l_cls +
    // lambda2*l_reg)/dparams into it.
    LossTerms loss(const Sample& s, double lambda1, double lambda2, std::vector<T>* grad = nullptr,
                   double scale = 1.0) const;

    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }

    // Logits with padded candidate slots set to -inf.
    std::vector<double> masked_logits(const Output& out, std::size_t valid, std::size_t candidate_slots) const;

private:
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return static_cast<std::size_t>(inputs_) * hidden_; }
    std::size_t w2_offset() const { return b1_offset() + hidden_; }
    std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(hidden_) * (classes_ + 2); }

    int inputs_ = 0;
    int hidden_ = 0;
    int classes_ = 0;
    std::vector<T> params_;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

struct ScorerShape {
    int crop_size = 64;
    int k = 20;
    int c_feat = 4;
    bool terminal = true;
    int hidden = 64;

    int input_dim() const { return crop_size * crop_size * (c_feat + k + 2); }
    int num_classes() const { return k + (terminal ? 1 : 0); }
    static ScorerShape from(const MatchConfig& cfg, int hidden = 64) {
        return {cfg.crop_size, cfg.k, cfg.c_feat, cfg.use_terminal_class, hidden};
    }
    friend bool operator==(const ScorerShape&, const ScorerShape&) = default;
};

struct TrainingExample {
    std::vector<float> input;          // flattened AggregatedPatch grid
    std::size_t valid_candidates = 0;
    std::size_t true_class = 0;
    std::array<float, 2> location_target{};  // (truth - anchor) / (S * feature_stride)
};

class ExampleSource {
public:
    virtual ~ExampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual void fill(std::size_t index, TrainingExample& out) const = 0;
};

class VectorExampleSource : public ExampleSource {
public:
    explicit VectorExampleSource(std::vector<TrainingExample> examples) : examples_(std::move(examples)) {}
    std::size_t size() const override { return examples_.size(); }
    void fill(std::size_t index, TrainingExample& out) const override { out = examples_.at(index); }

private:
    std::vector<TrainingExample> examples_;
};

struct TrainConfig {
    int epochs = 20;
    double lr = 1e-3;
    int batch_size = 32;
    std::uint64_t seed = 1;
    double lambda1 = 0.1;
    double lambda2 = 0.01;
};

struct EpochLog {
    int epoch = 0;
    double l_cls = 0.0;
    double l_reg = 0.0;
    double total = 0.0;
};

class TinyScorer : public Scorer {
public:
    TinyScorer(ScorerShape shape, std::uint64_t seed);
    TinyScorer(ScorerShape shape, Mlp<float> mlp);

    MatchDecision score(const MatchContext& ctx) const override;
    std::string name() const override { return "tiny"; }

    const ScorerShape& shape() const { return shape_; }
    const Mlp<float>& mlp() const { return mlp_; }
    Mlp<float>& mlp() { return mlp_; }

    // Parameter file: eight little-endian uint32 (magic "LMTS", version,
    // crop_size, k, c_feat, terminal, hidden, parameter count) followed by
    // the flat little-endian float32 parameter vector.
    void save(const std::filesystem::path& path) const;
    static TinyScorer load(const std::filesystem::path& path);

private:
    ScorerShape shape_;
    Mlp<float> mlp_;
};

// Mean losses of a scorer over a source (forward pass only).
EpochLog evaluate_examples(const TinyScorer& scorer, const ExampleSource& data, const TrainConfig& cfg);

// Mini-batch gradient descent on lambda1 * L_cls + lambda2 * L_reg.
// Deterministic given cfg.seed. The log receives one row per epoch
// (full-dataset losses after that epoch's updates).
TinyScorer tiny_scorer_train(const ExampleSource& data, const ScorerShape& shape, const TrainConfig& cfg,
                             std::vector<EpochLog>* log = nullptr);

// CSV with header `epoch,l_cls,l_reg,total`.
std::string format_training_log(std::span<const EpochLog> log);

}  // namespace lanemap
