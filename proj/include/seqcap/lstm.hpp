#pragma once

#include "seqcap/numerics.hpp"

namespace seqcap {

// Weights of one LSTM layer. Gate pre-activations are
//   a_* = W_x* x_t + W_h* h_prev (+ b_* when biases are enabled).
// W_x* are hidden_dim x input_dim, W_h* are hidden_dim x hidden_dim.
// Bias vectors are empty when has_bias is false; that mode computes the
// recurrences with no additive term at all.
struct LstmLayerParams {
    int input_dim = 0;
    int hidden_dim = 0;
    bool has_bias = true;

    Matrix w_xi, w_hi;
    Matrix w_xf, w_hf;
    Matrix w_xo, w_ho;
    Matrix w_xc, w_hc;
    RealVector b_i, b_f, b_o, b_c;

    bool operator==(const LstmLayerParams& o) const = default;
};

struct LstmState {
    RealVector h;
    RealVector c;
};

LstmState zero_state(int hidden_dim);

// Everything the backward pass needs from one forward step.
// g is the candidate activation tanh(W_xc x + W_hc h_prev [+ b_c]).
struct StepCache {
    RealVector x;
    RealVector h_prev, c_prev;
    RealVector i, f, o, g;
    RealVector c, h;
};

// Gradients flowing out of one backward step, toward the step inputs.
struct LstmStepInputGrads {
    RealVector dx;
    RealVector dh_prev;
    RealVector dc_prev;
};

// One step of the gated recurrence:
//   i = sigmoid(W_xi x + W_hi h_prev)     f, o analogous
//   c = f (.) c_prev + i (.) tanh(W_xc x + W_hc h_prev)
//   h = o (.) tanh(c)
std::pair<LstmState, StepCache> lstm_step_forward(const LstmLayerParams& p,
                                                  const RealVector& x,
                                                  const LstmState& prev);

// Chain rule through one cached step. dh and dc are the losses' gradients
// with respect to this step's h and c outputs. Parameter gradients are
// accumulated into `grads` (caller-owned, shaped like the layer); the
// returned struct carries the gradients for the step inputs.
LstmStepInputGrads lstm_step_backward(const LstmLayerParams& p,
                                      const StepCache& cache,
                                      const RealVector& dh,
                                      const RealVector& dc,
                                      LstmLayerParams& grads);

// Vanilla recurrence h_t = f(W_xh x + W_hh h_prev), the baseline cell.
enum class RnnNonlinearity { sigmoid, tanh };

struct RnnLayerParams {
    Matrix w_xh;
    Matrix w_hh;
    RnnNonlinearity nonlinearity = RnnNonlinearity::tanh;
};

RealVector rnn_step_forward(const RnnLayerParams& p, const RealVector& x,
                            const RealVector& h_prev);

// Uniform [-scale, scale] weights; biases (when on) start at zero.
LstmLayerParams init_layer(SeededRng& rng, int input_dim, int hidden_dim,
                           double scale, bool biases_on);

// All-zero gradient buffer shaped like p.
LstmLayerParams zero_like(const LstmLayerParams& p);

// Pointers to every trainable entry, in a fixed order shared between a
// layer and its gradient buffer. Used by the finite-difference check and
// the SGD update.
std::vector<double*> param_view(LstmLayerParams& p);

}  // namespace seqcap
