#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace stt {

// Dense 2-D float64 tensor. Copies are shallow: a Tensor is a handle to
// shared storage, which is what lets recorded backward closures reach the
// same gradient accumulators the caller sees.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor constant(std::size_t rows, std::size_t cols, double value);
    static Tensor identity(std::size_t n);
    static Tensor from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                            bool requires_grad = false);

    bool defined() const { return data_ != nullptr; }
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const { return rows() * cols(); }

    double at(std::size_t r, std::size_t c) const;
    void set(std::size_t r, std::size_t c, double v);
    double item() const;  // 1x1 only

    const std::vector<double>& values() const;
    std::vector<double>& mutable_values();

    bool requires_grad() const;
    // Whether backward will reach this tensor (requires_grad, or derived
    // from a tracked tensor). Tracked tensors always carry a grad buffer.
    bool tracked() const;
    const std::vector<double>& grad() const;
    void zero_grad();
    void accumulate_grad(const std::vector<double>& g);

    // Throws NumericalError naming `context` if any value is NaN/Inf.
    void check_finite(const std::string& context) const;

    bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  private:
    struct Data {
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<double> v;
        std::vector<double> g;
        bool requires_grad = false;
        bool tracked = false;
    };

    explicit Tensor(std::shared_ptr<Data> d) : data_(std::move(d)) {}
    std::shared_ptr<Data> data_;

    friend class Graph;
};

// Records every differentiable operation executed through it, in order.
// backward() replays the adjoints once, in reverse order. One Graph (and
// the tensors it produced) belongs to a single logical thread.
class Graph {
  public:
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& x);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
    Tensor scale(const Tensor& x, double c);
    Tensor add_row(const Tensor& x, const Tensor& row);  // broadcast 1xC over rows
    Tensor relu(const Tensor& x);
    Tensor tanh(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor log(const Tensor& x);
    Tensor softplus(const Tensor& x);
    Tensor softmax_rows(const Tensor& x, double scale);
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-5);
    // im2row: each output row is the flattened window [k x cols] starting
    // at row t*stride. Linear, so backward is a scatter-add.
    Tensor unfold(const Tensor& x, std::size_t k, std::size_t stride);
    // Valid cross-correlation along the row (token) axis. kernels is
    // (k*channels_in) x channels_out, bias is 1 x channels_out.
    Tensor conv1d(const Tensor& x, const Tensor& kernels, std::size_t k, std::size_t stride,
                  const Tensor& bias);
    Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor sum_all(const Tensor& x);
    Tensor l2_normalize_rows(const Tensor& x);
    // Mean binary cross-entropy in the numerically stable logit form.
    Tensor bce_with_logits(const Tensor& logits, const std::vector<int>& labels);

    // Seeds d(loss)/d(loss) = 1 and replays all recorded adjoints in
    // reverse. Gradients accumulate until zero_grad is called on the
    // tensors; repeated backward calls add up.
    void backward(const Tensor& loss);

    std::size_t num_ops() const { return tape_.size(); }

  private:
    Tensor make_output(std::size_t rows, std::size_t cols, bool tracked);
    static bool any_tracked(std::initializer_list<const Tensor*> ts);
    void finish(Tensor& out, const char* op, bool tracked, std::function<void()> adjoint);

    std::vector<std::function<void()>> tape_;
};

// Central finite differences of a scalar function over a flat parameter
// vector: (f(theta + h e_i) - f(theta - h e_i)) / (2h).
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h = 1e-5);

}  // namespace stt
