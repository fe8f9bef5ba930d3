#pragma once

#include "seqcap/data.hpp"
#include "seqcap/lstm.hpp"
#include "seqcap/numerics.hpp"

namespace seqcap {

// The full caption generator: at every step, layer 1 consumes the visual
// feature concatenated with a one-hot of the previous word, layer 2 consumes
// layer 1's hidden vector, and output_proj maps layer 2's hidden vector to
// vocabulary logits. Row w of output_proj is the embedding for word w.
struct ModelParams {
    int visual_dim = 0;
    Vocabulary vocab;
    LstmLayerParams layer1;  // input_dim = visual_dim + vocab.size()
    LstmLayerParams layer2;  // input_dim = layer1.hidden_dim
    Matrix output_proj;      // vocab.size() x layer2.hidden_dim

    int hidden_dim() const { return layer1.hidden_dim; }

    bool operator==(const ModelParams& o) const = default;
};

// Gradient buffer shaped like the trainable parts of ModelParams.
struct ModelGrads {
    LstmLayerParams layer1;
    LstmLayerParams layer2;
    Matrix output_proj;
};

// Weights i.i.d. uniform [-scale, scale]; draw order is layer1, layer2,
// output_proj, so a given (rng state, shape) pins every initial value.
ModelParams init_model(SeededRng& rng, const Vocabulary& vocab, int visual_dim,
                       int hidden_dim, double scale, bool biases_on);

ModelGrads zero_grads(const ModelParams& p);

// Throws std::invalid_argument if any cross-layer dimension disagrees.
void check_model(const ModelParams& p);

// Elementwise average of the frames. Values are summed per dimension in
// sorted order so the result is bit-for-bit permutation invariant.
RealVector mean_pool(const std::vector<RealVector>& frames);

struct ModelStepResult {
    RealVector logits;
    LstmState s1, s2;
    StepCache cache1, cache2;
};

ModelStepResult model_step(const ModelParams& p, const RealVector& v, int prev_word,
                           const LstmState& s1, const LstmState& s2);

// Forward pass over a whole caption under teacher forcing: the input word
// at step t is BOS for t=1 and the ground-truth s_{t-1} after. loss is the
// summed negative log-likelihood of the target words (EOS included).
struct SequenceForward {
    double loss = 0.0;
    std::vector<StepCache> cache1, cache2;
    std::vector<RealVector> probs;  // softmax over logits at each step
};

SequenceForward sequence_forward(const ModelParams& p, const RealVector& v,
                                 const TokenSequence& s);

// Exact gradient of the forward loss, accumulated backward through time.
// The local logit gradient at step t is softmax(logits_t) - onehot(s_t).
ModelGrads sequence_backward(const ModelParams& p, const SequenceForward& fwd,
                             const TokenSequence& s);

// Feed the model its own argmax prediction until EOS appears or max_len
// words have been emitted (EOS is then appended). Ties take the lowest
// word index, so decoding is deterministic.
TokenSequence greedy_decode(const ModelParams& p, const RealVector& v, int max_len = 30);

// Pointers to every trainable entry, ordered layer1, layer2, output_proj.
// The two views use the same ordering so entry k of one matches entry k of
// the other; the finite-difference check and SGD both rely on that.
std::vector<double*> param_view(ModelParams& p);
std::vector<double*> grad_view(ModelGrads& g);
std::vector<const double*> grad_view(const ModelGrads& g);

// The sequence loss re-evaluated by an independent transcription of the
// recurrences in extended precision. The gradient checker differences this
// instead of the double forward: at h = 1e-5 the rounding noise of a
// double-precision loss (~eps*L/2h ~ 1e-10) would swamp near-zero
// gradients, while extended precision keeps the comparison meaningful.
long double sequence_loss_extended(const ModelParams& p, const RealVector& v,
                                   const TokenSequence& s);

// Builds a seeded random (model, feature, target sequence) instance, runs
// the analytic backward pass, and returns the worst relative error
// |a - n| / max(1e-8, |a| + |n|) against central finite differences of the
// extended-precision loss over every parameter.
double gradient_check(uint64_t seed, int visual_dim, int hidden_dim, const Vocabulary& vocab,
                      int seq_len, double h = 1e-5, bool biases_on = true);

}  // namespace seqcap
