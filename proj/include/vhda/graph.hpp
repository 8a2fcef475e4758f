#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vhda/mat.hpp"
#include "vhda/rng.hpp"

namespace vhda {

// A trainable tensor plus its accumulated gradient and Adam moments.
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;
    Mat m;
    Mat v;

    Parameter(std::string n, int rows, int cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols),
          m(rows, cols), v(rows, cols) {}
};

class ParamStore {
public:
    Parameter& create(const std::string& name, int rows, int cols) {
        if (by_name_.count(name))
            throw std::logic_error("duplicate parameter: " + name);
        items_.push_back(std::make_unique<Parameter>(name, rows, cols));
        by_name_[name] = items_.back().get();
        return *items_.back();
    }

    Parameter& create_uniform(const std::string& name, int rows, int cols,
                              double lo, double hi, Rng& rng) {
        Parameter& p = create(name, rows, cols);
        for (double& x : p.value.a) x = rng.uniform(lo, hi);
        return p;
    }

    // Xavier/Glorot uniform for linear maps and recurrent cells.
    Parameter& create_xavier(const std::string& name, int rows, int cols, Rng& rng) {
        const double bound = std::sqrt(6.0 / (rows + cols));
        return create_uniform(name, rows, cols, -bound, bound, rng);
    }

    Parameter* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }

    const std::vector<std::unique_ptr<Parameter>>& all() const { return items_; }

    void zero_grad() {
        for (auto& p : items_) p->grad.set_zero();
    }

    size_t total_size() const {
        size_t n = 0;
        for (auto& p : items_) n += p->value.size();
        return n;
    }

private:
    std::vector<std::unique_ptr<Parameter>> items_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

enum class Op : uint8_t {
    Const,
    Param,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Scale,      // s * x
    AddScalar,  // x + s
    Tanh,
    Sigmoid,
    Softplus,
    Exp,
    Log,
    Sum,            // all elements -> 1x1
    Dot,            // sum(a .* b) -> 1x1
    ConcatRows,     // stack same-width blocks vertically
    HStack,         // columns (d x 1 each) -> d x n
    SliceRows,      // rows [i0, i1)
    PickRow,        // row i0 of a matrix, returned as a column vector
    SoftmaxCol,     // n x 1
    LogSoftmaxCol,  // n x 1
    LogSumExpCol,   // n x 1 -> 1x1
};

class Graph;

// Lightweight handle to a graph node.
struct Ex {
    Graph* g = nullptr;
    int id = -1;
    bool valid() const { return g != nullptr && id >= 0; }
};

class Graph {
public:
    struct Node {
        Mat val;
        Mat grad;
        Op op;
        int a = -1;
        int b = -1;
        int i0 = 0;
        int i1 = 0;
        double s = 0.0;
        Parameter* par = nullptr;
        int margs_begin = 0;
        int margs_count = 0;
    };

    void clear() {
        nodes_.clear();
        margs_.clear();
        param_nodes_.clear();
    }

    size_t size() const { return nodes_.size(); }

    // References are invalidated by any subsequent node creation; copy the
    // Mat when holding a value across further graph building.
    const Mat& val(Ex e) const { return nodes_[e.id].val; }
    const Mat& grad_of(Ex e) const { return nodes_[e.id].grad; }

    double scalar(Ex e) const {
        const Mat& m = nodes_[e.id].val;
        if (m.size() != 1) throw std::logic_error("scalar() on non-1x1 node");
        return m.a[0];
    }

    Ex constant(Mat m) {
        Node n;
        n.op = Op::Const;
        n.val = std::move(m);
        return push(std::move(n));
    }

    Ex zeros(int r, int c) { return constant(Mat::zeros(r, c)); }

    Ex scalar_const(double v) { return constant(Mat::constant(1, 1, v)); }

    // One node per parameter per graph; repeated requests share it so the
    // value is copied (and its gradient accumulated) exactly once.
    Ex param(Parameter& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return Ex{this, it->second};
        Node n;
        n.op = Op::Param;
        n.par = &p;
        n.val = p.value;
        Ex e = push(std::move(n));
        param_nodes_[&p] = e.id;
        return e;
    }

    Ex matmul(Ex a, Ex b) {
        const Mat& A = nodes_[a.id].val;
        const Mat& B = nodes_[b.id].val;
        if (A.cols != B.rows) throw std::logic_error("matmul shape mismatch");
        Node n;
        n.op = Op::MatMul;
        n.a = a.id;
        n.b = b.id;
        n.val = Mat(A.rows, B.cols);
        gemm(A, B, n.val);
        return push(std::move(n));
    }

    Ex add(Ex a, Ex b) { return binary_same(Op::Add, a, b); }
    Ex sub(Ex a, Ex b) { return binary_same(Op::Sub, a, b); }
    Ex mul(Ex a, Ex b) { return binary_same(Op::Mul, a, b); }
    Ex div(Ex a, Ex b) { return binary_same(Op::Div, a, b); }

    Ex scale(Ex a, double s) {
        Node n;
        n.op = Op::Scale;
        n.a = a.id;
        n.s = s;
        n.val = nodes_[a.id].val;
        for (double& x : n.val.a) x *= s;
        return push(std::move(n));
    }

    Ex add_scalar(Ex a, double s) {
        Node n;
        n.op = Op::AddScalar;
        n.a = a.id;
        n.s = s;
        n.val = nodes_[a.id].val;
        for (double& x : n.val.a) x += s;
        return push(std::move(n));
    }

    Ex tanh(Ex a) { return unary(Op::Tanh, a, [](double x) { return std::tanh(x); }); }
    Ex sigmoid(Ex a) { return unary(Op::Sigmoid, a, stable_sigmoid); }
    Ex softplus(Ex a) { return unary(Op::Softplus, a, stable_softplus); }
    Ex exp(Ex a) { return unary(Op::Exp, a, [](double x) { return std::exp(x); }); }
    Ex log(Ex a) { return unary(Op::Log, a, [](double x) { return std::log(x); }); }

    Ex sum(Ex a) {
        Node n;
        n.op = Op::Sum;
        n.a = a.id;
        double acc = 0.0;
        for (double x : nodes_[a.id].val.a) acc += x;
        n.val = Mat::constant(1, 1, acc);
        return push(std::move(n));
    }

    Ex dot(Ex a, Ex b) {
        const Mat& A = nodes_[a.id].val;
        const Mat& B = nodes_[b.id].val;
        if (!A.same_shape(B)) throw std::logic_error("dot shape mismatch");
        Node n;
        n.op = Op::Dot;
        n.a = a.id;
        n.b = b.id;
        double acc = 0.0;
        for (size_t i = 0; i < A.size(); ++i) acc += A.a[i] * B.a[i];
        n.val = Mat::constant(1, 1, acc);
        return push(std::move(n));
    }

    Ex concat_rows(const std::vector<Ex>& xs) {
        if (xs.empty()) throw std::logic_error("concat_rows of empty list");
        int cols = nodes_[xs[0].id].val.cols;
        int rows = 0;
        for (Ex e : xs) {
            const Mat& m = nodes_[e.id].val;
            if (m.cols != cols) throw std::logic_error("concat_rows width mismatch");
            rows += m.rows;
        }
        Node n;
        n.op = Op::ConcatRows;
        n.val = Mat(rows, cols);
        n.margs_begin = static_cast<int>(margs_.size());
        n.margs_count = static_cast<int>(xs.size());
        int r = 0;
        for (Ex e : xs) {
            margs_.push_back(e.id);
            const Mat& m = nodes_[e.id].val;
            std::copy(m.a.begin(), m.a.end(), n.val.a.begin() + static_cast<size_t>(r) * cols);
            r += m.rows;
        }
        return push(std::move(n));
    }

    // Column vectors (d x 1) become the columns of a (d x n) matrix.
    Ex hstack(const std::vector<Ex>& xs) {
        if (xs.empty()) throw std::logic_error("hstack of empty list");
        int d = nodes_[xs[0].id].val.rows;
        Node n;
        n.op = Op::HStack;
        n.val = Mat(d, static_cast<int>(xs.size()));
        n.margs_begin = static_cast<int>(margs_.size());
        n.margs_count = static_cast<int>(xs.size());
        for (size_t j = 0; j < xs.size(); ++j) {
            const Mat& m = nodes_[xs[j].id].val;
            if (m.rows != d || m.cols != 1) throw std::logic_error("hstack needs d x 1 columns");
            margs_.push_back(xs[j].id);
            for (int i = 0; i < d; ++i) n.val(i, static_cast<int>(j)) = m(i, 0);
        }
        return push(std::move(n));
    }

    Ex slice_rows(Ex a, int r0, int r1) {
        const Mat& A = nodes_[a.id].val;
        if (r0 < 0 || r1 > A.rows || r0 >= r1) throw std::logic_error("slice_rows bounds");
        Node n;
        n.op = Op::SliceRows;
        n.a = a.id;
        n.i0 = r0;
        n.i1 = r1;
        n.val = Mat(r1 - r0, A.cols);
        std::copy(A.a.begin() + static_cast<size_t>(r0) * A.cols,
                  A.a.begin() + static_cast<size_t>(r1) * A.cols, n.val.a.begin());
        return push(std::move(n));
    }

    // Row i of a matrix as a column vector (embedding lookup).
    Ex pick_row(Ex a, int i) {
        const Mat& A = nodes_[a.id].val;
        if (i < 0 || i >= A.rows) throw std::out_of_range("pick_row index");
        Node n;
        n.op = Op::PickRow;
        n.a = a.id;
        n.i0 = i;
        n.val = Mat(A.cols, 1);
        for (int j = 0; j < A.cols; ++j) n.val(j, 0) = A(i, j);
        return push(std::move(n));
    }

    Ex pick(Ex a, int i) { return slice_rows(a, i, i + 1); }

    Ex softmax(Ex a) {
        const Mat& A = check_col(a, "softmax");
        Node n;
        n.op = Op::SoftmaxCol;
        n.a = a.id;
        n.val = Mat(A.rows, 1);
        double mx = A.a[0];
        for (double x : A.a) mx = std::max(mx, x);
        double z = 0.0;
        for (int i = 0; i < A.rows; ++i) {
            n.val(i, 0) = std::exp(A(i, 0) - mx);
            z += n.val(i, 0);
        }
        for (int i = 0; i < A.rows; ++i) n.val(i, 0) /= z;
        return push(std::move(n));
    }

    Ex log_softmax(Ex a) {
        const Mat& A = check_col(a, "log_softmax");
        Node n;
        n.op = Op::LogSoftmaxCol;
        n.a = a.id;
        n.val = Mat(A.rows, 1);
        double mx = A.a[0];
        for (double x : A.a) mx = std::max(mx, x);
        double z = 0.0;
        for (int i = 0; i < A.rows; ++i) z += std::exp(A(i, 0) - mx);
        const double lz = mx + std::log(z);
        for (int i = 0; i < A.rows; ++i) n.val(i, 0) = A(i, 0) - lz;
        return push(std::move(n));
    }

    Ex logsumexp(Ex a) {
        const Mat& A = check_col(a, "logsumexp");
        Node n;
        n.op = Op::LogSumExpCol;
        n.a = a.id;
        double mx = A.a[0];
        for (double x : A.a) mx = std::max(mx, x);
        double z = 0.0;
        for (int i = 0; i < A.rows; ++i) z += std::exp(A(i, 0) - mx);
        n.val = Mat::constant(1, 1, mx + std::log(z));
        return push(std::move(n));
    }

    // Reverse sweep from a 1x1 loss node. Gradients of Param leaves are
    // accumulated into their Parameter::grad.
    void backward(Ex loss) {
        Node& ln = nodes_[loss.id];
        if (ln.val.size() != 1) throw std::logic_error("backward needs scalar loss");
        for (auto& n : nodes_) {
            n.grad = Mat(n.val.rows, n.val.cols);
        }
        nodes_[loss.id].grad.a[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) backprop_node(id);
        for (auto& n : nodes_) {
            if (n.op == Op::Param) {
                for (size_t i = 0; i < n.grad.size(); ++i) n.par->grad.a[i] += n.grad.a[i];
            }
        }
    }

private:
    Ex push(Node n) {
        nodes_.push_back(std::move(n));
        return Ex{this, static_cast<int>(nodes_.size() - 1)};
    }

    const Mat& check_col(Ex a, const char* what) const {
        const Mat& A = nodes_[a.id].val;
        if (A.cols != 1) throw std::logic_error(std::string(what) + " needs a column vector");
        return A;
    }

    Ex binary_same(Op op, Ex a, Ex b) {
        const Mat& A = nodes_[a.id].val;
        const Mat& B = nodes_[b.id].val;
        if (!A.same_shape(B)) throw std::logic_error("elementwise shape mismatch");
        Node n;
        n.op = op;
        n.a = a.id;
        n.b = b.id;
        n.val = Mat(A.rows, A.cols);
        switch (op) {
            case Op::Add:
                for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] + B.a[i];
                break;
            case Op::Sub:
                for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] - B.a[i];
                break;
            case Op::Mul:
                for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] * B.a[i];
                break;
            case Op::Div:
                for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] / B.a[i];
                break;
            default:
                throw std::logic_error("bad binary op");
        }
        return push(std::move(n));
    }

    template <class F>
    Ex unary(Op op, Ex a, F f) {
        Node n;
        n.op = op;
        n.a = a.id;
        n.val = nodes_[a.id].val;
        for (double& x : n.val.a) x = f(x);
        return push(std::move(n));
    }

    void backprop_node(int id) {
        Node& n = nodes_[id];
        bool any = false;
        for (double g : n.grad.a)
            if (g != 0.0) {
                any = true;
                break;
            }
        if (!any) return;
        switch (n.op) {
            case Op::Const:
            case Op::Param:
                break;
            case Op::MatMul: {
                Mat& dA = nodes_[n.a].grad;
                Mat& dB = nodes_[n.b].grad;
                gemm_nt_acc(n.grad, nodes_[n.b].val, dA);
                gemm_tn_acc(nodes_[n.a].val, n.grad, dB);
                break;
            }
            case Op::Add: {
                acc(nodes_[n.a].grad, n.grad, 1.0);
                acc(nodes_[n.b].grad, n.grad, 1.0);
                break;
            }
            case Op::Sub: {
                acc(nodes_[n.a].grad, n.grad, 1.0);
                acc(nodes_[n.b].grad, n.grad, -1.0);
                break;
            }
            case Op::Mul: {
                Mat& dA = nodes_[n.a].grad;
                Mat& dB = nodes_[n.b].grad;
                const Mat& A = nodes_[n.a].val;
                const Mat& B = nodes_[n.b].val;
                for (size_t i = 0; i < n.grad.size(); ++i) {
                    dA.a[i] += n.grad.a[i] * B.a[i];
                    dB.a[i] += n.grad.a[i] * A.a[i];
                }
                break;
            }
            case Op::Div: {
                Mat& dA = nodes_[n.a].grad;
                Mat& dB = nodes_[n.b].grad;
                const Mat& A = nodes_[n.a].val;
                const Mat& B = nodes_[n.b].val;
                for (size_t i = 0; i < n.grad.size(); ++i) {
                    dA.a[i] += n.grad.a[i] / B.a[i];
                    dB.a[i] -= n.grad.a[i] * A.a[i] / (B.a[i] * B.a[i]);
                }
                break;
            }
            case Op::Scale:
                acc(nodes_[n.a].grad, n.grad, n.s);
                break;
            case Op::AddScalar:
                acc(nodes_[n.a].grad, n.grad, 1.0);
                break;
            case Op::Tanh: {
                Mat& dA = nodes_[n.a].grad;
                for (size_t i = 0; i < n.grad.size(); ++i)
                    dA.a[i] += n.grad.a[i] * (1.0 - n.val.a[i] * n.val.a[i]);
                break;
            }
            case Op::Sigmoid: {
                Mat& dA = nodes_[n.a].grad;
                for (size_t i = 0; i < n.grad.size(); ++i)
                    dA.a[i] += n.grad.a[i] * n.val.a[i] * (1.0 - n.val.a[i]);
                break;
            }
            case Op::Softplus: {
                Mat& dA = nodes_[n.a].grad;
                const Mat& A = nodes_[n.a].val;
                for (size_t i = 0; i < n.grad.size(); ++i)
                    dA.a[i] += n.grad.a[i] * stable_sigmoid(A.a[i]);
                break;
            }
            case Op::Exp: {
                Mat& dA = nodes_[n.a].grad;
                for (size_t i = 0; i < n.grad.size(); ++i) dA.a[i] += n.grad.a[i] * n.val.a[i];
                break;
            }
            case Op::Log: {
                Mat& dA = nodes_[n.a].grad;
                const Mat& A = nodes_[n.a].val;
                for (size_t i = 0; i < n.grad.size(); ++i) dA.a[i] += n.grad.a[i] / A.a[i];
                break;
            }
            case Op::Sum: {
                acc_all(nodes_[n.a].grad, n.grad.a[0]);
                break;
            }
            case Op::Dot: {
                Mat& dA = nodes_[n.a].grad;
                Mat& dB = nodes_[n.b].grad;
                const Mat& A = nodes_[n.a].val;
                const Mat& B = nodes_[n.b].val;
                const double g = n.grad.a[0];
                for (size_t i = 0; i < A.size(); ++i) {
                    dA.a[i] += g * B.a[i];
                    dB.a[i] += g * A.a[i];
                }
                break;
            }
            case Op::ConcatRows: {
                int r = 0;
                for (int k = 0; k < n.margs_count; ++k) {
                    Node& child = nodes_[margs_[n.margs_begin + k]];
                    const size_t len = child.grad.size();
                    const size_t off = static_cast<size_t>(r) * n.val.cols;
                    for (size_t i = 0; i < len; ++i) child.grad.a[i] += n.grad.a[off + i];
                    r += child.val.rows;
                }
                break;
            }
            case Op::HStack: {
                for (int k = 0; k < n.margs_count; ++k) {
                    Node& child = nodes_[margs_[n.margs_begin + k]];
                    for (int i = 0; i < child.val.rows; ++i)
                        child.grad(i, 0) += n.grad(i, k);
                }
                break;
            }
            case Op::SliceRows: {
                Mat& dA = nodes_[n.a].grad;
                const size_t off = static_cast<size_t>(n.i0) * dA.cols;
                for (size_t i = 0; i < n.grad.size(); ++i) dA.a[off + i] += n.grad.a[i];
                break;
            }
            case Op::PickRow: {
                Mat& dA = nodes_[n.a].grad;
                for (int j = 0; j < dA.cols; ++j) dA(n.i0, j) += n.grad(j, 0);
                break;
            }
            case Op::SoftmaxCol: {
                Mat& dA = nodes_[n.a].grad;
                double ydotg = 0.0;
                for (int i = 0; i < n.val.rows; ++i) ydotg += n.val(i, 0) * n.grad(i, 0);
                for (int i = 0; i < n.val.rows; ++i)
                    dA(i, 0) += n.val(i, 0) * (n.grad(i, 0) - ydotg);
                break;
            }
            case Op::LogSoftmaxCol: {
                Mat& dA = nodes_[n.a].grad;
                double gsum = 0.0;
                for (int i = 0; i < n.val.rows; ++i) gsum += n.grad(i, 0);
                for (int i = 0; i < n.val.rows; ++i)
                    dA(i, 0) += n.grad(i, 0) - std::exp(n.val(i, 0)) * gsum;
                break;
            }
            case Op::LogSumExpCol: {
                Mat& dA = nodes_[n.a].grad;
                const Mat& A = nodes_[n.a].val;
                const double g = n.grad.a[0];
                const double lz = n.val.a[0];
                for (int i = 0; i < A.rows; ++i) dA(i, 0) += g * std::exp(A(i, 0) - lz);
                break;
            }
        }
    }

    static void acc(Mat& dst, const Mat& src, double s) {
        for (size_t i = 0; i < dst.size(); ++i) dst.a[i] += s * src.a[i];
    }

    static void acc_all(Mat& dst, double g) {
        for (double& x : dst.a) x += g;
    }

    std::vector<Node> nodes_;
    std::vector<int> margs_;
    std::unordered_map<Parameter*, int> param_nodes_;
};

// Operator sugar; all operands must live on the same graph.
inline Ex operator+(Ex a, Ex b) { return a.g->add(a, b); }
inline Ex operator-(Ex a, Ex b) { return a.g->sub(a, b); }
inline Ex operator*(Ex a, Ex b) { return a.g->mul(a, b); }
inline Ex operator/(Ex a, Ex b) { return a.g->div(a, b); }
inline Ex operator*(double s, Ex a) { return a.g->scale(a, s); }
inline Ex operator*(Ex a, double s) { return a.g->scale(a, s); }
inline Ex operator-(Ex a) { return a.g->scale(a, -1.0); }
inline Ex matmul(Ex a, Ex b) { return a.g->matmul(a, b); }
inline Ex tanh(Ex a) { return a.g->tanh(a); }
inline Ex sigmoid(Ex a) { return a.g->sigmoid(a); }
inline Ex softplus(Ex a) { return a.g->softplus(a); }
inline Ex exp(Ex a) { return a.g->exp(a); }
inline Ex log(Ex a) { return a.g->log(a); }
inline Ex sum(Ex a) { return a.g->sum(a); }
inline Ex dot(Ex a, Ex b) { return a.g->dot(a, b); }
inline Ex softmax(Ex a) { return a.g->softmax(a); }
inline Ex log_softmax(Ex a) { return a.g->log_softmax(a); }
inline Ex logsumexp(Ex a) { return a.g->logsumexp(a); }
inline Ex concat_rows(const std::vector<Ex>& xs) { return xs.at(0).g->concat_rows(xs); }
inline Ex hstack(const std::vector<Ex>& xs) { return xs.at(0).g->hstack(xs); }

}  // namespace vhda
