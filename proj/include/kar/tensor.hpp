#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kar/error.hpp"

// Reverse-mode autodiff over dense Eigen matrices. A Graph owns the tape for
// one forward pass; Tensor is a cheap handle into it. Parameters live outside
// the graph and collect gradients across backward() calls until zero_grad().

namespace kar::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

std::string shape_str(Eigen::Index rows, Eigen::Index cols);
inline std::string shape_str(const Mat& m) { return shape_str(m.rows(), m.cols()); }

struct Parameter {
    std::string name;
    Mat value;
    Mat grad;

    Parameter(std::string n, Mat v)
        : name(std::move(n)), value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())) {}
};

// Insertion-ordered so that init and optimizer sweeps are deterministic.
class ParameterStore {
public:
    Parameter& create(const std::string& name, Mat init);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

    void zero_grad();
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

class Graph;

class Tensor {
public:
    Tensor() = default;
    Tensor(Graph* g, std::int32_t id) : g_(g), id_(id) {}

    const Mat& value() const;
    const Mat& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    bool valid() const { return g_ != nullptr; }

    Graph* graph() const { return g_; }
    std::int32_t id() const { return id_; }

private:
    Graph* g_ = nullptr;
    std::int32_t id_ = -1;
};

class Graph {
public:
    struct Node {
        Mat value;
        Mat grad;
        Parameter* param = nullptr;
        // Propagates this node's grad into its inputs (captured by id).
        std::function<void(Graph&, Node&)> backward_fn;
    };

    Tensor input(Mat v);
    Tensor scalar(double v);
    Tensor param(Parameter& p);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation
    // order, which is a topological order by construction.
    void backward(Tensor loss);

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    Node& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Tensor emplace(Mat value, std::function<void(Graph&, Node&)> backward_fn);

private:
    std::vector<Node> nodes_;
};

// ---- ops -------------------------------------------------------------

// Elementwise sum; also accepts b as a 1xC row broadcast over a's rows (bias).
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
// Elementwise product, same shapes.
Tensor mul(Tensor a, Tensor b);
Tensor scale(Tensor a, double c);
Tensor matmul(Tensor a, Tensor b);
// x*W + b with b a 1xC row vector.
Tensor affine(Tensor x, Tensor w, Tensor b);

Tensor relu(Tensor x);
Tensor sigmoid(Tensor x);
// axis 1: softmax within each row; axis 0: within each column.
Tensor softmax(Tensor x, int axis = 1);

// axis 1: side-by-side (same rows); axis 0: stacked (same cols).
Tensor concat(const std::vector<Tensor>& xs, int axis = 1);
Tensor slice_cols(Tensor x, Eigen::Index start, Eigen::Index n);

Tensor row_sum(Tensor x);               // (r,c) -> (r,1)
Tensor mean(Tensor x, int axis);        // axis 0 -> (1,c); axis 1 -> (r,1)
Tensor mean_all(Tensor x);              // (1,1)

// out(i,j) = x(i,j) * s(i,0); s has shape (rows,1).
Tensor scale_rows(Tensor x, Tensor s);

// Gathers rows of `table` (a param or input leaf); indices are not
// differentiated. Out-of-range index is a data error.
Tensor embedding_lookup(Tensor table, std::span<const std::int32_t> indices);

// Mean-reduced binary cross-entropy with predictions clamped to
// [eps, 1-eps], eps = 1e-7. Labels must be exactly 0 or 1.
Tensor bce_loss(Tensor preds, std::span<const double> labels);

inline constexpr double kBceEps = 1e-7;

}  // namespace kar::nn

namespace kar {
class Rng;
}

namespace kar::nn {
// Fan-scaled uniform init in +-sqrt(6 / (fan_in + fan_out)).
Mat xavier_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols);
}  // namespace kar::nn
