#include "stt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stt/errors.hpp"

namespace stt {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

}  // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto d = std::make_shared<Data>();
    d->rows = rows;
    d->cols = cols;
    d->v.assign(rows * cols, 0.0);
    d->requires_grad = requires_grad;
    d->tracked = requires_grad;
    if (d->tracked) d->g.assign(rows * cols, 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, double value) {
    Tensor t = zeros(rows, cols, false);
    std::fill(t.data_->v.begin(), t.data_->v.end(), value);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros(n, n, false);
    for (std::size_t i = 0; i < n; ++i) t.data_->v[i * n + i] = 1.0;
    return t;
}

Tensor Tensor::from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                           bool requires_grad) {
    if (values.size() != rows * cols)
        throw ShapeError("from_values: got " + std::to_string(values.size()) + " values for " +
                         shape_str(rows, cols));
    Tensor t = zeros(rows, cols, requires_grad);
    t.data_->v = std::move(values);
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged rows");
        v.insert(v.end(), row.begin(), row.end());
    }
    return from_values(r, c, std::move(v), requires_grad);
}

std::size_t Tensor::rows() const { return data_ ? data_->rows : 0; }
std::size_t Tensor::cols() const { return data_ ? data_->cols : 0; }

double Tensor::at(std::size_t r, std::size_t c) const { return data_->v[r * data_->cols + c]; }
void Tensor::set(std::size_t r, std::size_t c, double v) { data_->v[r * data_->cols + c] = v; }

double Tensor::item() const {
    if (size() != 1) throw ContractError("item: tensor is " + shape_str(rows(), cols()) + ", not scalar");
    return data_->v[0];
}

const std::vector<double>& Tensor::values() const { return data_->v; }
std::vector<double>& Tensor::mutable_values() { return data_->v; }

bool Tensor::requires_grad() const { return data_ && data_->requires_grad; }
bool Tensor::tracked() const { return data_ && data_->tracked; }

const std::vector<double>& Tensor::grad() const {
    if (!tracked()) throw ContractError("grad: tensor is not tracked");
    return data_->g;
}

void Tensor::zero_grad() {
    if (tracked()) std::fill(data_->g.begin(), data_->g.end(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
    if (!tracked()) return;
    if (g.size() != data_->g.size()) throw ShapeError("accumulate_grad: size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) data_->g[i] += g[i];
}

void Tensor::check_finite(const std::string& context) const {
    for (double x : data_->v)
        if (!std::isfinite(x))
            throw NumericalError("non-finite value in " + context);
}

Tensor Graph::make_output(std::size_t rows, std::size_t cols, bool tracked) {
    Tensor t = Tensor::zeros(rows, cols, false);
    t.data_->tracked = tracked;
    if (tracked) t.data_->g.assign(rows * cols, 0.0);
    return t;
}

bool Graph::any_tracked(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->tracked()) return true;
    return false;
}

void Graph::finish(Tensor& out, const char* op, bool tracked, std::function<void()> adjoint) {
    out.check_finite(op);
    if (tracked) tape_.push_back(std::move(adjoint));
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " x " +
                         shape_str(b.rows(), b.cols()));
    const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
    bool tracked = any_tracked({&a, &b});
    Tensor out = make_output(r, c, tracked);
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) ov[i * c + j] += aip * bv[p * c + j];
        }
    finish(out, "matmul", tracked, [a, b, out, r, k, c]() {
        const auto& g = out.grad();
        if (a.tracked()) {
            std::vector<double> ga(r * k, 0.0);
            const auto& bv = b.values();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const double gij = g[i * c + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[p * c + j];
                }
            const_cast<Tensor&>(a).accumulate_grad(ga);
        }
        if (b.tracked()) {
            std::vector<double> gb(k * c, 0.0);
            const auto& av = a.values();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = av[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < c; ++j) gb[p * c + j] += aip * g[i * c + j];
                }
            const_cast<Tensor&>(b).accumulate_grad(gb);
        }
    });
    return out;
}

Tensor Graph::transpose(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    bool tracked = x.tracked();
    Tensor out = make_output(c, r, tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ov[j * r + i] = xv[i * c + j];
    finish(out, "transpose", tracked, [x, out, r, c]() {
        const auto& g = out.grad();
        std::vector<double> gx(r * c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] = g[j * r + i];
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("add: " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
    bool tracked = any_tracked({&a, &b});
    Tensor out = make_output(a.rows(), a.cols(), tracked);
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    finish(out, "add", tracked, [a, b, out]() {
        const auto& g = out.grad();
        const_cast<Tensor&>(a).accumulate_grad(g);
        const_cast<Tensor&>(b).accumulate_grad(g);
    });
    return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("sub: " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
    bool tracked = any_tracked({&a, &b});
    Tensor out = make_output(a.rows(), a.cols(), tracked);
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    finish(out, "sub", tracked, [a, b, out]() {
        const auto& g = out.grad();
        const_cast<Tensor&>(a).accumulate_grad(g);
        if (b.tracked()) {
            std::vector<double> gb(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
            const_cast<Tensor&>(b).accumulate_grad(gb);
        }
    });
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("mul: " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
    bool tracked = any_tracked({&a, &b});
    Tensor out = make_output(a.rows(), a.cols(), tracked);
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    finish(out, "mul", tracked, [a, b, out]() {
        const auto& g = out.grad();
        if (a.tracked()) {
            std::vector<double> ga(g.size());
            const auto& bv = b.values();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * bv[i];
            const_cast<Tensor&>(a).accumulate_grad(ga);
        }
        if (b.tracked()) {
            std::vector<double> gb(g.size());
            const auto& av = a.values();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * av[i];
            const_cast<Tensor&>(b).accumulate_grad(gb);
        }
    });
    return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * c;
    finish(out, "scale", tracked, [x, out, c]() {
        const auto& g = out.grad();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * c;
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::add_row(const Tensor& x, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != x.cols())
        throw ShapeError("add_row: " + shape_str(x.rows(), x.cols()) + " + " +
                         shape_str(row.rows(), row.cols()));
    bool tracked = any_tracked({&x, &row});
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out = make_output(r, c, tracked);
    const auto& xv = x.values();
    const auto& bv = row.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = xv[i * c + j] + bv[j];
    finish(out, "add_row", tracked, [x, row, out, r, c]() {
        const auto& g = out.grad();
        const_cast<Tensor&>(x).accumulate_grad(g);
        if (row.tracked()) {
            std::vector<double> gb(c, 0.0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
            const_cast<Tensor&>(row).accumulate_grad(gb);
        }
    });
    return out;
}

Tensor Graph::relu(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    finish(out, "relu", tracked, [x, out]() {
        const auto& g = out.grad();
        const auto& xv = x.values();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = xv[i] > 0.0 ? g[i] : 0.0;
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::tanh(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
    finish(out, "tanh", tracked, [x, out]() {
        const auto& g = out.grad();
        const auto& yv = out.values();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * (1.0 - yv[i] * yv[i]);
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::exp(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::exp(xv[i]);
    finish(out, "exp", tracked, [x, out]() {
        const auto& g = out.grad();
        const auto& yv = out.values();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * yv[i];
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::log(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::log(xv[i]);
    finish(out, "log", tracked, [x, out]() {
        const auto& g = out.grad();
        const auto& xv = x.values();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] / xv[i];
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::softplus(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(x.rows(), x.cols(), tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < ov.size(); ++i)
        ov[i] = xv[i] > 0.0 ? xv[i] + std::log1p(std::exp(-xv[i])) : std::log1p(std::exp(xv[i]));
    finish(out, "softplus", tracked, [x, out]() {
        const auto& g = out.grad();
        const auto& xv = x.values();
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] / (1.0 + std::exp(-xv[i]));
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::softmax_rows(const Tensor& x, double sc) {
    if (sc <= 0.0) throw ContractError("softmax_rows: scale must be positive");
    x.check_finite("softmax_rows input");
    const std::size_t r = x.rows(), c = x.cols();
    bool tracked = x.tracked();
    Tensor out = make_output(r, c, tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = xv[i * c] / sc;
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j] / sc);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(xv[i * c + j] / sc - mx);
            ov[i * c + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < c; ++j) ov[i * c + j] /= sum;
    }
    finish(out, "softmax_rows", tracked, [x, out, r, c, sc]() {
        const auto& g = out.grad();
        const auto& yv = out.values();
        std::vector<double> gx(r * c);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yv[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                gx[i * c + j] = yv[i * c + j] * (g[i * c + j] - dot) / sc;
        }
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    const std::size_t r = x.rows(), c = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
        throw ShapeError("layer_norm: gamma/beta must be 1x" + std::to_string(c));
    bool tracked = any_tracked({&x, &gamma, &beta});
    Tensor out = make_output(r, c, tracked);
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    auto& ov = out.mutable_values();
    // keep per-row mean and inverse stddev for the adjoint
    auto mean = std::make_shared<std::vector<double>>(r);
    auto istd = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        (*mean)[i] = mu;
        (*istd)[i] = is;
        for (std::size_t j = 0; j < c; ++j)
            ov[i * c + j] = gv[j] * (xv[i * c + j] - mu) * is + bv[j];
    }
    finish(out, "layer_norm", tracked, [x, gamma, beta, out, r, c, mean, istd]() {
        const auto& g = out.grad();
        const auto& xv = x.values();
        const auto& gv = gamma.values();
        const double n = static_cast<double>(c);
        std::vector<double> gx(r * c, 0.0), gg(c, 0.0), gb(c, 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            const double mu = (*mean)[i];
            const double is = (*istd)[i];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double xhat = (xv[i * c + j] - mu) * is;
                const double dxhat = g[i * c + j] * gv[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                gg[j] += g[i * c + j] * xhat;
                gb[j] += g[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                const double xhat = (xv[i * c + j] - mu) * is;
                const double dxhat = g[i * c + j] * gv[j];
                gx[i * c + j] = is * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
            }
        }
        const_cast<Tensor&>(x).accumulate_grad(gx);
        if (gamma.tracked()) const_cast<Tensor&>(gamma).accumulate_grad(gg);
        if (beta.tracked()) const_cast<Tensor&>(beta).accumulate_grad(gb);
    });
    return out;
}

Tensor Graph::unfold(const Tensor& x, std::size_t k, std::size_t stride) {
    const std::size_t tokens = x.rows(), c = x.cols();
    if (k == 0 || k > tokens)
        throw ShapeError("unfold: kernel " + std::to_string(k) + " exceeds tokens " +
                         std::to_string(tokens));
    if (stride < 1) throw ShapeError("unfold: stride must be >= 1");
    const std::size_t t_out = (tokens - k) / stride + 1;
    bool tracked = x.tracked();
    Tensor out = make_output(t_out, k * c, tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t t = 0; t < t_out; ++t)
        for (std::size_t u = 0; u < k; ++u)
            for (std::size_t j = 0; j < c; ++j)
                ov[t * k * c + u * c + j] = xv[(t * stride + u) * c + j];
    finish(out, "unfold", tracked, [x, out, k, stride, t_out, c, tokens]() {
        const auto& g = out.grad();
        std::vector<double> gx(tokens * c, 0.0);
        for (std::size_t t = 0; t < t_out; ++t)
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t j = 0; j < c; ++j)
                    gx[(t * stride + u) * c + j] += g[t * k * c + u * c + j];
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::conv1d(const Tensor& x, const Tensor& kernels, std::size_t k, std::size_t stride,
                     const Tensor& bias) {
    if (kernels.rows() != k * x.cols())
        throw ShapeError("conv1d: kernels rows " + std::to_string(kernels.rows()) +
                         " != k*channels_in " + std::to_string(k * x.cols()));
    Tensor patches = unfold(x, k, stride);
    return add_row(matmul(patches, kernels), bias);
}

Tensor Graph::slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    const std::size_t r = x.rows(), c = x.cols();
    if (start + len > c) throw ShapeError("slice_cols: out of range");
    bool tracked = x.tracked();
    Tensor out = make_output(r, len, tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < len; ++j) ov[i * len + j] = xv[i * c + start + j];
    finish(out, "slice_cols", tracked, [x, out, start, len, r, c]() {
        const auto& g = out.grad();
        std::vector<double> gx(r * c, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < len; ++j) gx[i * c + start + j] = g[i * len + j];
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
        c += p.cols();
        tracked = tracked || p.tracked();
    }
    Tensor out = make_output(r, c, tracked);
    auto& ov = out.mutable_values();
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.values();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j) ov[i * c + off + j] = pv[i * p.cols() + j];
        off += p.cols();
    }
    finish(out, "concat_cols", tracked, [parts, out, r, c]() {
        const auto& g = out.grad();
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (p.tracked()) {
                std::vector<double> gp(r * p.cols());
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < p.cols(); ++j)
                        gp[i * p.cols() + j] = g[i * c + off + j];
                const_cast<Tensor&>(p).accumulate_grad(gp);
            }
            off += p.cols();
        }
    });
    return out;
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
        r += p.rows();
        tracked = tracked || p.tracked();
    }
    Tensor out = make_output(r, c, tracked);
    auto& ov = out.mutable_values();
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.values();
        std::copy(pv.begin(), pv.end(), ov.begin() + static_cast<std::ptrdiff_t>(off * c));
        off += p.rows();
    }
    finish(out, "concat_rows", tracked, [parts, out, c]() {
        const auto& g = out.grad();
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (p.tracked()) {
                std::vector<double> gp(g.begin() + static_cast<std::ptrdiff_t>(off * c),
                                       g.begin() + static_cast<std::ptrdiff_t>((off + p.rows()) * c));
                const_cast<Tensor&>(p).accumulate_grad(gp);
            }
            off += p.rows();
        }
    });
    return out;
}

Tensor Graph::sum_all(const Tensor& x) {
    bool tracked = x.tracked();
    Tensor out = make_output(1, 1, tracked);
    double s = 0.0;
    for (double v : x.values()) s += v;
    out.mutable_values()[0] = s;
    finish(out, "sum_all", tracked, [x, out]() {
        const double g = out.grad()[0];
        std::vector<double> gx(x.size(), g);
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::l2_normalize_rows(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    bool tracked = x.tracked();
    Tensor out = make_output(r, c, tracked);
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    auto norm = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
        // floor keeps a dead (all-zero) row well-defined: it normalizes to
        // zero instead of poisoning the whole batch; healthy rows are exact
        const double n = std::max(std::sqrt(s), 1e-8);
        (*norm)[i] = n;
        for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = xv[i * c + j] / n;
    }
    finish(out, "l2_normalize_rows", tracked, [x, out, r, c, norm]() {
        const auto& g = out.grad();
        const auto& yv = out.values();
        std::vector<double> gx(r * c);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yv[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                gx[i * c + j] = (g[i * c + j] - yv[i * c + j] * dot) / (*norm)[i];
        }
        const_cast<Tensor&>(x).accumulate_grad(gx);
    });
    return out;
}

Tensor Graph::bce_with_logits(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.cols() != 1)
        throw ShapeError("bce_with_logits: logits must be Bx1");
    const std::size_t b = logits.rows();
    if (labels.size() != b) throw ShapeError("bce_with_logits: label count mismatch");
    bool tracked = logits.tracked();
    Tensor out = make_output(1, 1, tracked);
    const auto& zv = logits.values();
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double z = zv[i];
        const double y = static_cast<double>(labels[i]);
        // log(1+e^z) - y*z, evaluated without overflow
        total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
    }
    out.mutable_values()[0] = total / static_cast<double>(b);
    finish(out, "bce_with_logits", tracked, [logits, out, labels, b]() {
        const double g = out.grad()[0];
        const auto& zv = logits.values();
        std::vector<double> gz(b);
        for (std::size_t i = 0; i < b; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-zv[i]));
            gz[i] = g * (p - static_cast<double>(labels[i])) / static_cast<double>(b);
        }
        const_cast<Tensor&>(logits).accumulate_grad(gz);
    });
    return out;
}

void Graph::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got " +
                            std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
    if (!loss.tracked()) throw ContractError("backward: loss is not connected to any parameter");
    const_cast<Tensor&>(loss).accumulate_grad({1.0});
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h) {
    if (h <= 0.0) throw ContractError("finite_diff_grad: h must be positive");
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace stt
