#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "plansel/matrix.hpp"

// Reverse-mode autodiff over dense fp64 matrices. A Tensor is a shared handle
// to one value buffer plus an optional gradient buffer of the same shape; a
// Tape is the ordered record of primitive operations built during a forward
// pass. Recording order is topological by construction, and backward() replays
// each record exactly once in reverse.
namespace plansel::ad {

class Tensor {
  public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false);

    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    std::size_t rows() const { return impl_->rows; }
    std::size_t cols() const { return impl_->cols; }
    std::size_t size() const { return impl_->values.size(); }

    double* data() const { return impl_->values.data(); }
    double& at(std::size_t r, std::size_t c) const { return impl_->values[r * cols() + c]; }
    double item() const;  // 1x1 only

    bool requires_grad() const { return impl_->requires_grad; }
    // Gradient buffer, zero-initialized on first access. Only valid on
    // tensors with requires_grad set.
    double* grad() const;
    bool grad_allocated() const { return !impl_->grad.empty(); }
    void zero_grad() const;

    Matrix to_matrix() const;

    // identity of the underlying buffer, for aliasing checks in tests
    const void* id() const { return impl_.get(); }

  private:
    struct Impl {
        std::size_t rows = 0;
        std::size_t cols = 0;
        mutable std::vector<double> values;
        mutable std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

class Tape {
  public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
    std::size_t size() const { return steps_.size(); }

    // Seeds d(loss)=1 and replays all records in reverse order, consuming
    // them. loss must be 1x1 with requires_grad.
    void backward(const Tensor& loss);

    void clear() { steps_.clear(); }

  private:
    std::vector<std::function<void()>> steps_;
};

// --- primitive operations -------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_rowvec(Tape& tape, const Tensor& a, const Tensor& bias);  // bias is 1 x cols
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor mul_scalar(Tape& tape, const Tensor& a, const Tensor& s);  // s is 1x1, learnable

Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor tanh_act(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);
Tensor leaky_relu(Tape& tape, const Tensor& a, double slope);

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor gather_rows(Tape& tape, const Tensor& a, const std::vector<std::int32_t>& idx);
Tensor scale_rows(Tape& tape, const Tensor& a, const std::vector<double>& coeff);
Tensor mul_colvec(Tape& tape, const Tensor& a, const Tensor& w);  // w is rows x 1

// Row v of the result is the sum of message rows with dst == v; nodes with no
// incoming message stay zero. Backward scatters gradients back to the edges.
Tensor segment_sum(Tape& tape, const Tensor& messages, const std::vector<std::int32_t>& dst,
                   std::size_t num_nodes);

// Grouped softmax over an E x 1 logit column; groups are destination indices.
// Max-subtraction inside each group keeps it stable.
Tensor segment_softmax(Tape& tape, const Tensor& logits, const std::vector<std::int32_t>& dst,
                       std::size_t num_groups);

Tensor reduce_mean_rows(Tape& tape, const Tensor& a);  // 1 x cols
Tensor reduce_sum_rows(Tape& tape, const Tensor& a);   // 1 x cols

Tensor loss_mse(Tape& tape, const Tensor& pred, const Tensor& target);
// Logit-space binary cross entropy, mean over entries, computed as
// log(1+exp(-z*(2y-1))) in log-sum-exp form.
Tensor loss_bce_logits(Tape& tape, const Tensor& logits, const Tensor& targets);

// --- optimizer --------------------------------------------------------------

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// Standard Adam with bias correction over a fixed parameter list. Moment
// buffers are allocated on first use and must keep matching the parameters.
void adam_step(std::vector<Tensor>& params, AdamState& state);
void zero_grads(std::vector<Tensor>& params);

// --- gradient checking -------------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_nonsmooth = 0;
};

// Central finite differences at fp64 against tape gradients. fn must build a
// 1x1 loss from the given inputs on the provided tape; it must be
// differentiable at the inputs. Coordinates whose one-sided differences
// disagree (a kink inside the probe interval, e.g. a ReLU crossing) are
// excluded and counted in skipped_nonsmooth.
GradCheckReport grad_check(const std::function<Tensor(Tape&, std::vector<Tensor>&)>& fn,
                           std::vector<Tensor>& inputs, double step = 1e-5);

}  // namespace plansel::ad
