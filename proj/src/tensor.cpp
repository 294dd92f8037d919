#include "kar/tensor.hpp"

#include <cmath>
#include <sstream>

#include "kar/rng.hpp"

namespace kar::nn {

std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << "(" << rows << "x" << cols << ")";
    return os.str();
}

namespace {

[[noreturn]] void shape_fail(const std::string& op, const Mat& a, const Mat& b) {
    fail_numeric("shape mismatch in " + op + ": " + shape_str(a) + " vs " + shape_str(b));
}

void check_same_graph(const std::string& op, Tensor a, Tensor b) {
    if (a.graph() != b.graph())
        fail_numeric(op + ": operands belong to different graphs");
}

}  // namespace

Parameter& ParameterStore::create(const std::string& name, Mat init) {
    if (by_name_.count(name)) fail_config("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
    by_name_[name] = params_.back().get();
    return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) fail_config("unknown parameter: " + name);
    return *it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) fail_config("unknown parameter: " + name);
    return *it->second;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->grad.setZero();
}

const Mat& Tensor::value() const { return g_->node(id_).value; }
const Mat& Tensor::grad() const { return g_->node(id_).grad; }

Tensor Graph::emplace(Mat value, std::function<void(Graph&, Node&)> backward_fn) {
    Node n;
    n.grad = Mat::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(n));
    return Tensor(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Tensor Graph::input(Mat v) { return emplace(std::move(v), nullptr); }

Tensor Graph::scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return input(std::move(m));
}

Tensor Graph::param(Parameter& p) {
    Tensor t = emplace(p.value, nullptr);
    node(t.id()).param = &p;
    return t;
}

void Graph::backward(Tensor loss) {
    if (loss.graph() != this) fail_numeric("backward: tensor from another graph");
    if (loss.rows() != 1 || loss.cols() != 1)
        fail_numeric("backward requires a scalar loss, got " + shape_str(loss.value()));
    node(loss.id()).grad(0, 0) = 1.0;
    for (std::int32_t i = loss.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.backward_fn) n.backward_fn(*this, n);
        if (n.param) n.param->grad += n.grad;
    }
}

// ---- ops -------------------------------------------------------------

Tensor add(Tensor a, Tensor b) {
    check_same_graph("add", a, b);
    Graph& g = *a.graph();
    const Mat& av = a.value();
    const Mat& bv = b.value();
    const std::int32_t ai = a.id(), bi = b.id();
    if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
        return g.emplace(av + bv, [ai, bi](Graph& g, Graph::Node& n) {
            g.node(ai).grad += n.grad;
            g.node(bi).grad += n.grad;
        });
    }
    if (bv.rows() == 1 && bv.cols() == av.cols()) {
        return g.emplace(av.rowwise() + bv.row(0), [ai, bi](Graph& g, Graph::Node& n) {
            g.node(ai).grad += n.grad;
            g.node(bi).grad += n.grad.colwise().sum();
        });
    }
    shape_fail("add", av, bv);
}

Tensor sub(Tensor a, Tensor b) {
    check_same_graph("sub", a, b);
    Graph& g = *a.graph();
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_fail("sub", av, bv);
    const std::int32_t ai = a.id(), bi = b.id();
    return g.emplace(av - bv, [ai, bi](Graph& g, Graph::Node& n) {
        g.node(ai).grad += n.grad;
        g.node(bi).grad -= n.grad;
    });
}

Tensor mul(Tensor a, Tensor b) {
    check_same_graph("mul", a, b);
    Graph& g = *a.graph();
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_fail("mul", av, bv);
    const std::int32_t ai = a.id(), bi = b.id();
    return g.emplace(av.cwiseProduct(bv), [ai, bi](Graph& g, Graph::Node& n) {
        g.node(ai).grad += n.grad.cwiseProduct(g.node(bi).value);
        g.node(bi).grad += n.grad.cwiseProduct(g.node(ai).value);
    });
}

Tensor scale(Tensor a, double c) {
    Graph& g = *a.graph();
    const std::int32_t ai = a.id();
    return g.emplace(a.value() * c, [ai, c](Graph& g, Graph::Node& n) {
        g.node(ai).grad += n.grad * c;
    });
}

Tensor matmul(Tensor a, Tensor b) {
    check_same_graph("matmul", a, b);
    Graph& g = *a.graph();
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
    const std::int32_t ai = a.id(), bi = b.id();
    return g.emplace(av * bv, [ai, bi](Graph& g, Graph::Node& n) {
        g.node(ai).grad.noalias() += n.grad * g.node(bi).value.transpose();
        g.node(bi).grad.noalias() += g.node(ai).value.transpose() * n.grad;
    });
}

Tensor affine(Tensor x, Tensor w, Tensor b) { return add(matmul(x, w), b); }

Tensor relu(Tensor x) {
    Graph& g = *x.graph();
    const std::int32_t xi = x.id();
    return g.emplace(x.value().cwiseMax(0.0), [xi](Graph& g, Graph::Node& n) {
        const Mat& xv = g.node(xi).value;
        g.node(xi).grad += n.grad.cwiseProduct(
            (xv.array() > 0.0).cast<double>().matrix());
    });
}

Tensor sigmoid(Tensor x) {
    Graph& g = *x.graph();
    Mat out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
    const std::int32_t xi = x.id();
    return g.emplace(std::move(out), [xi](Graph& g, Graph::Node& n) {
        const auto& y = n.value.array();
        g.node(xi).grad += (n.grad.array() * y * (1.0 - y)).matrix();
    });
}

Tensor softmax(Tensor x, int axis) {
    if (axis != 0 && axis != 1) fail_config("softmax: axis must be 0 or 1");
    Graph& g = *x.graph();
    const Mat& xv = x.value();
    Mat out(xv.rows(), xv.cols());
    if (axis == 1) {
        for (Eigen::Index i = 0; i < xv.rows(); ++i) {
            Eigen::ArrayXd e = (xv.row(i).array() - xv.row(i).maxCoeff()).exp();
            out.row(i) = (e / e.sum()).matrix();
        }
    } else {
        for (Eigen::Index j = 0; j < xv.cols(); ++j) {
            Eigen::ArrayXd e = (xv.col(j).array() - xv.col(j).maxCoeff()).exp();
            out.col(j) = (e / e.sum()).matrix();
        }
    }
    const std::int32_t xi = x.id();
    return g.emplace(std::move(out), [xi, axis](Graph& g, Graph::Node& n) {
        Mat& xg = g.node(xi).grad;
        if (axis == 1) {
            for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
                double dot = n.grad.row(i).dot(n.value.row(i));
                xg.row(i) += ((n.grad.row(i).array() - dot) * n.value.row(i).array()).matrix();
            }
        } else {
            for (Eigen::Index j = 0; j < n.value.cols(); ++j) {
                double dot = n.grad.col(j).dot(n.value.col(j));
                xg.col(j) += ((n.grad.col(j).array() - dot) * n.value.col(j).array()).matrix();
            }
        }
    });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) fail_numeric("concat: empty input list");
    if (axis != 0 && axis != 1) fail_config("concat: axis must be 0 or 1");
    Graph& g = *xs.front().graph();
    for (const Tensor& t : xs) check_same_graph("concat", xs.front(), t);

    Eigen::Index rows = xs.front().rows(), cols = xs.front().cols();
    if (axis == 1) {
        cols = 0;
        for (const Tensor& t : xs) {
            if (t.rows() != rows) shape_fail("concat", xs.front().value(), t.value());
            cols += t.cols();
        }
    } else {
        rows = 0;
        for (const Tensor& t : xs) {
            if (t.cols() != cols) shape_fail("concat", xs.front().value(), t.value());
            rows += t.rows();
        }
    }
    Mat out(rows, cols);
    std::vector<std::int32_t> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const Tensor& t : xs) {
        ids.push_back(t.id());
        offsets.push_back(off);
        if (axis == 1) {
            out.middleCols(off, t.cols()) = t.value();
            off += t.cols();
        } else {
            out.middleRows(off, t.rows()) = t.value();
            off += t.rows();
        }
    }
    return g.emplace(std::move(out),
                     [ids, offsets, axis](Graph& g, Graph::Node& n) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Mat& ig = g.node(ids[k]).grad;
            if (axis == 1)
                ig += n.grad.middleCols(offsets[k], ig.cols());
            else
                ig += n.grad.middleRows(offsets[k], ig.rows());
        }
    });
}

Tensor slice_cols(Tensor x, Eigen::Index start, Eigen::Index n) {
    Graph& g = *x.graph();
    const Mat& xv = x.value();
    if (start < 0 || n < 1 || start + n > xv.cols())
        fail_numeric("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + n) + ") out of " + shape_str(xv));
    const std::int32_t xi = x.id();
    return g.emplace(xv.middleCols(start, n), [xi, start, n](Graph& g, Graph::Node& nd) {
        g.node(xi).grad.middleCols(start, n) += nd.grad;
    });
}

Tensor row_sum(Tensor x) {
    Graph& g = *x.graph();
    const std::int32_t xi = x.id();
    return g.emplace(x.value().rowwise().sum(), [xi](Graph& g, Graph::Node& n) {
        Mat& xg = g.node(xi).grad;
        xg += n.grad * Mat::Ones(1, xg.cols());
    });
}

Tensor mean(Tensor x, int axis) {
    if (axis != 0 && axis != 1) fail_config("mean: axis must be 0 or 1");
    Graph& g = *x.graph();
    const Mat& xv = x.value();
    const std::int32_t xi = x.id();
    if (axis == 0) {
        const double inv = 1.0 / static_cast<double>(xv.rows());
        return g.emplace(xv.colwise().mean(), [xi, inv](Graph& g, Graph::Node& n) {
            Mat& xg = g.node(xi).grad;
            xg += (Mat::Ones(xg.rows(), 1) * n.grad) * inv;
        });
    }
    const double inv = 1.0 / static_cast<double>(xv.cols());
    return g.emplace(xv.rowwise().mean(), [xi, inv](Graph& g, Graph::Node& n) {
        Mat& xg = g.node(xi).grad;
        xg += (n.grad * Mat::Ones(1, xg.cols())) * inv;
    });
}

Tensor mean_all(Tensor x) {
    Graph& g = *x.graph();
    const Mat& xv = x.value();
    Mat out(1, 1);
    out(0, 0) = xv.mean();
    const double inv = 1.0 / static_cast<double>(xv.size());
    const std::int32_t xi = x.id();
    return g.emplace(std::move(out), [xi, inv](Graph& g, Graph::Node& n) {
        g.node(xi).grad.array() += n.grad(0, 0) * inv;
    });
}

Tensor scale_rows(Tensor x, Tensor s) {
    check_same_graph("scale_rows", x, s);
    Graph& g = *x.graph();
    const Mat& xv = x.value();
    const Mat& sv = s.value();
    if (sv.cols() != 1 || sv.rows() != xv.rows()) shape_fail("scale_rows", xv, sv);
    const std::int32_t xi = x.id(), si = s.id();
    return g.emplace(xv.array().colwise() * sv.col(0).array(),
                     [xi, si](Graph& g, Graph::Node& n) {
        const Mat& xv = g.node(xi).value;
        const Mat& sv = g.node(si).value;
        g.node(xi).grad += (n.grad.array().colwise() * sv.col(0).array()).matrix();
        g.node(si).grad.col(0) += n.grad.cwiseProduct(xv).rowwise().sum();
    });
}

Tensor embedding_lookup(Tensor table, std::span<const std::int32_t> indices) {
    Graph& g = *table.graph();
    const Mat& tv = table.value();
    Mat out(static_cast<Eigen::Index>(indices.size()), tv.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::int32_t idx = indices[i];
        if (idx < 0 || idx >= tv.rows())
            fail_data("embedding index " + std::to_string(idx) + " out of table " + shape_str(tv));
        out.row(static_cast<Eigen::Index>(i)) = tv.row(idx);
    }
    std::vector<std::int32_t> idx(indices.begin(), indices.end());
    const std::int32_t ti = table.id();
    return g.emplace(std::move(out), [ti, idx = std::move(idx)](Graph& g, Graph::Node& n) {
        Mat& tg = g.node(ti).grad;
        for (std::size_t i = 0; i < idx.size(); ++i)
            tg.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    });
}

Tensor bce_loss(Tensor preds, std::span<const double> labels) {
    Graph& g = *preds.graph();
    const Mat& pv = preds.value();
    if (pv.cols() != 1 || static_cast<std::size_t>(pv.rows()) != labels.size())
        fail_numeric("bce_loss: preds " + shape_str(pv) + " vs " +
                     std::to_string(labels.size()) + " labels");
    const Eigen::Index n = pv.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y = labels[i];
        if (y != 0.0 && y != 1.0)
            fail_data("bce_loss: label must be 0 or 1, got " + std::to_string(y));
        const double p = std::clamp(pv(i, 0), kBceEps, 1.0 - kBceEps);
        total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    Mat out(1, 1);
    out(0, 0) = -total / static_cast<double>(n);
    std::vector<double> ys(labels.begin(), labels.end());
    const std::int32_t pi = preds.id();
    return g.emplace(std::move(out), [pi, ys = std::move(ys)](Graph& g, Graph::Node& nd) {
        const Mat& pv = g.node(pi).value;
        Mat& pg = g.node(pi).grad;
        const double inv = 1.0 / static_cast<double>(ys.size());
        const double up = nd.grad(0, 0);
        for (Eigen::Index i = 0; i < pv.rows(); ++i) {
            const double p = pv(i, 0);
            if (p <= kBceEps || p >= 1.0 - kBceEps) continue;  // clamped: flat
            pg(i, 0) += up * inv * (p - ys[static_cast<std::size_t>(i)]) / (p * (1.0 - p));
        }
    });
}

Mat xavier_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace kar::nn
