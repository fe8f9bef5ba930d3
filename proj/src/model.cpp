#include "seqcap/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace seqcap {

ModelParams init_model(SeededRng& rng, const Vocabulary& vocab, int visual_dim,
                       int hidden_dim, double scale, bool biases_on) {
    if (visual_dim < 1 || hidden_dim < 1)
        throw std::invalid_argument("init_model: dimensions must be >= 1");
    ModelParams p;
    p.visual_dim = visual_dim;
    p.vocab = vocab;
    p.layer1 = init_layer(rng, visual_dim + vocab.size(), hidden_dim, scale, biases_on);
    p.layer2 = init_layer(rng, hidden_dim, hidden_dim, scale, biases_on);
    p.output_proj = uniform_init(rng, vocab.size(), hidden_dim, scale);
    return p;
}

ModelGrads zero_grads(const ModelParams& p) {
    ModelGrads g;
    g.layer1 = zero_like(p.layer1);
    g.layer2 = zero_like(p.layer2);
    g.output_proj = Matrix(p.output_proj.rows, p.output_proj.cols);
    return g;
}

void check_model(const ModelParams& p) {
    if (p.visual_dim < 1) throw std::invalid_argument("model: visual_dim must be >= 1");
    if (p.layer1.input_dim != p.visual_dim + p.vocab.size())
        throw std::invalid_argument("model: layer1 input dim != visual_dim + vocab size");
    if (p.layer2.input_dim != p.layer1.hidden_dim)
        throw std::invalid_argument("model: layer2 input dim != layer1 hidden dim");
    if (p.output_proj.rows != p.vocab.size() || p.output_proj.cols != p.layer2.hidden_dim)
        throw std::invalid_argument("model: output_proj shape mismatch");
    if (p.layer1.has_bias != p.layer2.has_bias)
        throw std::invalid_argument("model: layers disagree on bias mode");
}

RealVector mean_pool(const std::vector<RealVector>& frames) {
    if (frames.empty()) throw std::invalid_argument("mean_pool: no frames");
    size_t dim = frames[0].size();
    for (const RealVector& f : frames)
        if (f.size() != dim) throw std::invalid_argument("mean_pool: frame dimension mismatch");
    RealVector out(dim);
    std::vector<double> column(frames.size());
    for (size_t d = 0; d < dim; ++d) {
        for (size_t k = 0; k < frames.size(); ++k) column[k] = frames[k][d];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column) sum += v;
        out[d] = sum / static_cast<double>(frames.size());
    }
    return out;
}

namespace {

RealVector step_input(const ModelParams& p, const RealVector& v, int prev_word) {
    if (static_cast<int>(v.size()) != p.visual_dim)
        throw std::invalid_argument("model_step: feature dimension mismatch");
    if (prev_word < 0 || prev_word >= p.vocab.size())
        throw std::invalid_argument("model_step: previous word index out of range");
    RealVector x(p.visual_dim + p.vocab.size(), 0.0);
    std::copy(v.begin(), v.end(), x.begin());
    x[p.visual_dim + prev_word] = 1.0;
    return x;
}

int argmax_lowest(const RealVector& v) {
    // max_element keeps the first maximum, i.e. the lowest index on ties.
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

ModelStepResult model_step(const ModelParams& p, const RealVector& v, int prev_word,
                           const LstmState& s1, const LstmState& s2) {
    RealVector x = step_input(p, v, prev_word);
    auto [new_s1, cache1] = lstm_step_forward(p.layer1, x, s1);
    auto [new_s2, cache2] = lstm_step_forward(p.layer2, new_s1.h, s2);
    ModelStepResult r;
    r.logits = matvec(p.output_proj, new_s2.h);
    r.s1 = std::move(new_s1);
    r.s2 = std::move(new_s2);
    r.cache1 = std::move(cache1);
    r.cache2 = std::move(cache2);
    return r;
}

SequenceForward sequence_forward(const ModelParams& p, const RealVector& v,
                                 const TokenSequence& s) {
    if (!is_well_formed(s, p.vocab.size()))
        throw std::invalid_argument("sequence_forward: malformed token sequence");
    SequenceForward fwd;
    fwd.cache1.reserve(s.size());
    fwd.cache2.reserve(s.size());
    fwd.probs.reserve(s.size());
    LstmState s1 = zero_state(p.layer1.hidden_dim);
    LstmState s2 = zero_state(p.layer2.hidden_dim);
    int prev = Vocabulary::kBos;
    for (int target : s) {
        ModelStepResult r = model_step(p, v, prev, s1, s2);
        RealVector logp = log_softmax(r.logits);
        fwd.loss -= logp[target];
        RealVector probs(logp.size());
        for (size_t k = 0; k < logp.size(); ++k) probs[k] = std::exp(logp[k]);
        fwd.cache1.push_back(std::move(r.cache1));
        fwd.cache2.push_back(std::move(r.cache2));
        fwd.probs.push_back(std::move(probs));
        s1 = std::move(r.s1);
        s2 = std::move(r.s2);
        prev = target;
    }
    return fwd;
}

ModelGrads sequence_backward(const ModelParams& p, const SequenceForward& fwd,
                             const TokenSequence& s) {
    if (fwd.cache1.size() != s.size() || fwd.probs.size() != s.size())
        throw std::invalid_argument("sequence_backward: cache/sequence mismatch");
    ModelGrads g = zero_grads(p);

    int h = p.layer2.hidden_dim;
    RealVector dh1_carry(p.layer1.hidden_dim, 0.0), dc1_carry(p.layer1.hidden_dim, 0.0);
    RealVector dh2_carry(h, 0.0), dc2_carry(h, 0.0);

    for (int t = static_cast<int>(s.size()) - 1; t >= 0; --t) {
        RealVector dlogits = fwd.probs[t];
        dlogits[s[t]] -= 1.0;

        const RealVector& h2 = fwd.cache2[t].h;
        add_outer(g.output_proj, dlogits, h2);

        RealVector dh2 = matvec_transpose(p.output_proj, dlogits);
        for (int k = 0; k < h; ++k) dh2[k] += dh2_carry[k];

        LstmStepInputGrads back2 =
            lstm_step_backward(p.layer2, fwd.cache2[t], dh2, dc2_carry, g.layer2);
        dh2_carry = std::move(back2.dh_prev);
        dc2_carry = std::move(back2.dc_prev);

        RealVector dh1 = std::move(back2.dx);
        for (int k = 0; k < p.layer1.hidden_dim; ++k) dh1[k] += dh1_carry[k];

        LstmStepInputGrads back1 =
            lstm_step_backward(p.layer1, fwd.cache1[t], dh1, dc1_carry, g.layer1);
        dh1_carry = std::move(back1.dh_prev);
        dc1_carry = std::move(back1.dc_prev);
        // back1.dx would be the gradient for the visual feature and the
        // one-hot input; neither is trainable here.
    }
    return g;
}

TokenSequence greedy_decode(const ModelParams& p, const RealVector& v, int max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    TokenSequence out;
    LstmState s1 = zero_state(p.layer1.hidden_dim);
    LstmState s2 = zero_state(p.layer2.hidden_dim);
    int prev = Vocabulary::kBos;
    for (int t = 0; t < max_len; ++t) {
        ModelStepResult r = model_step(p, v, prev, s1, s2);
        int w = argmax_lowest(r.logits);
        out.push_back(w);
        if (w == Vocabulary::kEos) return out;
        prev = w;
        s1 = std::move(r.s1);
        s2 = std::move(r.s2);
    }
    out.push_back(Vocabulary::kEos);
    return out;
}

namespace {

template <typename Grads>
void append_entries(std::vector<double*>& out, Grads& layer1, Grads& layer2,
                    Matrix& output_proj) {
    std::vector<double*> v1 = param_view(layer1);
    std::vector<double*> v2 = param_view(layer2);
    out.insert(out.end(), v1.begin(), v1.end());
    out.insert(out.end(), v2.begin(), v2.end());
    for (double& x : output_proj.data) out.push_back(&x);
}

}  // namespace

std::vector<double*> param_view(ModelParams& p) {
    std::vector<double*> out;
    append_entries(out, p.layer1, p.layer2, p.output_proj);
    return out;
}

std::vector<double*> grad_view(ModelGrads& g) {
    std::vector<double*> out;
    append_entries(out, g.layer1, g.layer2, g.output_proj);
    return out;
}

std::vector<const double*> grad_view(const ModelGrads& g) {
    std::vector<double*> mut = grad_view(const_cast<ModelGrads&>(g));
    return std::vector<const double*>(mut.begin(), mut.end());
}

long double sequence_loss_extended(const ModelParams& p, const RealVector& v,
                                   const TokenSequence& s) {
    check_model(p);
    if (static_cast<int>(v.size()) != p.visual_dim)
        throw std::invalid_argument("sequence_loss_extended: feature dimension mismatch");
    if (!is_well_formed(s, p.vocab.size()))
        throw std::invalid_argument("sequence_loss_extended: malformed token sequence");

    using LdVec = std::vector<long double>;
    auto preact = [](const Matrix& wx, const Matrix& wh, const RealVector& b, const LdVec& x,
                     const LdVec& h_prev, int r) {
        long double a = b.empty() ? 0.0L : static_cast<long double>(b[r]);
        for (int c = 0; c < wx.cols; ++c) a += static_cast<long double>(wx.at(r, c)) * x[c];
        for (int c = 0; c < wh.cols; ++c) a += static_cast<long double>(wh.at(r, c)) * h_prev[c];
        return a;
    };
    auto sig = [](long double a) {
        return a >= 0.0L ? 1.0L / (1.0L + expl(-a)) : expl(a) / (1.0L + expl(a));
    };
    auto step = [&](const LstmLayerParams& layer, const LdVec& x, LdVec& h, LdVec& c) {
        LdVec h_new(layer.hidden_dim), c_new(layer.hidden_dim);
        for (int r = 0; r < layer.hidden_dim; ++r) {
            long double i = sig(preact(layer.w_xi, layer.w_hi, layer.b_i, x, h, r));
            long double f = sig(preact(layer.w_xf, layer.w_hf, layer.b_f, x, h, r));
            long double o = sig(preact(layer.w_xo, layer.w_ho, layer.b_o, x, h, r));
            long double g = tanhl(preact(layer.w_xc, layer.w_hc, layer.b_c, x, h, r));
            c_new[r] = f * c[r] + i * g;
            h_new[r] = o * tanhl(c_new[r]);
        }
        h = std::move(h_new);
        c = std::move(c_new);
    };

    const int vocab = p.vocab.size();
    LdVec h1(p.layer1.hidden_dim, 0.0L), c1(p.layer1.hidden_dim, 0.0L);
    LdVec h2(p.layer2.hidden_dim, 0.0L), c2(p.layer2.hidden_dim, 0.0L);
    long double loss = 0.0L;
    int prev = Vocabulary::kBos;
    for (int target : s) {
        LdVec x(static_cast<size_t>(p.visual_dim) + vocab, 0.0L);
        for (int d = 0; d < p.visual_dim; ++d) x[d] = static_cast<long double>(v[d]);
        x[static_cast<size_t>(p.visual_dim) + prev] = 1.0L;
        step(p.layer1, x, h1, c1);
        step(p.layer2, h1, h2, c2);

        LdVec z(vocab);
        long double zmax = -std::numeric_limits<long double>::infinity();
        for (int w = 0; w < vocab; ++w) {
            long double acc = 0.0L;
            for (int k = 0; k < p.layer2.hidden_dim; ++k)
                acc += static_cast<long double>(p.output_proj.at(w, k)) * h2[k];
            z[w] = acc;
            zmax = std::max(zmax, acc);
        }
        long double denom = 0.0L;
        for (int w = 0; w < vocab; ++w) denom += expl(z[w] - zmax);
        loss -= z[target] - zmax - logl(denom);
        prev = target;
    }
    return loss;
}

double gradient_check(uint64_t seed, int visual_dim, int hidden_dim, const Vocabulary& vocab,
                      int seq_len, double h, bool biases_on) {
    if (seq_len < 1) throw std::invalid_argument("gradient_check: seq_len must be >= 1");
    if (!(h > 0.0)) throw std::invalid_argument("gradient_check: step size must be > 0");
    SeededRng rng(seed);
    ModelParams p = init_model(rng, vocab, visual_dim, hidden_dim, 0.08, biases_on);
    RealVector v(visual_dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    TokenSequence s;
    for (int t = 0; t + 1 < seq_len; ++t) {
        // Any token but EOS may appear mid-sequence.
        uint64_t u = rng.next_below(static_cast<uint64_t>(vocab.size()) - 1);
        s.push_back(u == 0 ? 0 : static_cast<int>(u) + 1);
    }
    s.push_back(Vocabulary::kEos);

    SequenceForward fwd = sequence_forward(p, v, s);
    const ModelGrads g = sequence_backward(p, fwd, s);
    std::vector<const double*> analytic = grad_view(g);
    std::vector<double*> params = param_view(p);

    double worst = 0.0;
    for (size_t k = 0; k < params.size(); ++k) {
        double saved = *params[k];
        *params[k] = saved + h;
        long double up = sequence_loss_extended(p, v, s);
        *params[k] = saved - h;
        long double down = sequence_loss_extended(p, v, s);
        *params[k] = saved;
        double n = static_cast<double>((up - down) / (2.0L * static_cast<long double>(h)));
        double a = *analytic[k];
        double rel = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace seqcap
