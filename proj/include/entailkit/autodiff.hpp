#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "entailkit/tensor.hpp"

namespace entailkit {

// Reverse-mode tape. Graphs are built dynamically: every op allocates a node
// holding its value, a gradient buffer and a closure that scatters the
// upstream gradient into the parents. Single-threaded by contract.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value, allocated lazily
  std::vector<Var> parents;
  std::function<void(Node&)> backward;  // accumulates node.grad into parents
  int topo_mark = 0;

  Tensor& ensure_grad() {
    if (grad.data.size() != value.data.size()) grad = Tensor::zeros(value.shape);
    return grad;
  }
};

inline Var make_leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

inline Var constant(Tensor value) { return make_leaf(std::move(value)); }
inline Var constant(double v) { return make_leaf(Tensor::scalar(v)); }

namespace detail {

inline void require(bool cond, const std::string& op, const std::string& msg) {
  if (!cond) throw ShapeError(op + ": " + msg);
}

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  return n;
}

inline void accumulate(Var& p, const Tensor& g) {
  Tensor& pg = p->ensure_grad();
  for (std::size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
}

}  // namespace detail

// ---- elementwise / arithmetic ----

inline Var add(Var a, Var b) {
  detail::require(same_shape(a->value, b->value), "add",
                  "shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return detail::make_op(std::move(out), {a, b}, [](Node& n) {
    detail::accumulate(n.parents[0], n.grad);
    detail::accumulate(n.parents[1], n.grad);
  });
}

// a: [n x d], b: [d], broadcast over rows
inline Var add_rowvec(Var a, Var b) {
  std::size_t d = a->value.cols();
  detail::require(b->value.shape.size() == 1 && b->value.shape[0] == d, "add_rowvec",
                  "bias " + b->value.shape_str() + " does not match " + a->value.shape_str());
  Tensor out = a->value;
  std::size_t n = out.rows();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) += b->value.data[c];
  return detail::make_op(std::move(out), {a, b}, [n, d](Node& nd) {
    detail::accumulate(nd.parents[0], nd.grad);
    Tensor& bg = nd.parents[1]->ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) bg.data[c] += nd.grad.at(r, c);
  });
}

inline Var mul(Var a, Var b) {
  detail::require(same_shape(a->value, b->value), "mul",
                  "shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return detail::make_op(std::move(out), {a, b}, [](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    Tensor& bg = n.parents[1]->ensure_grad();
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
      ag.data[i] += n.grad.data[i] * bv.data[i];
      bg.data[i] += n.grad.data[i] * av.data[i];
    }
  });
}

inline Var scale(Var a, double c) {
  Tensor out = a->value;
  for (auto& v : out.data) v *= c;
  return detail::make_op(std::move(out), {a}, [c](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) ag.data[i] += c * n.grad.data[i];
  });
}

// elementwise scale of a by a scalar Var
inline Var scale_by(Var a, Var s) {
  detail::require(s->value.data.size() == 1, "scale_by", "scale must be scalar");
  double sv = s->value.data[0];
  Tensor out = a->value;
  for (auto& v : out.data) v *= sv;
  return detail::make_op(std::move(out), {a, s}, [sv](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    Tensor& sg = n.parents[1]->ensure_grad();
    const Tensor& av = n.parents[0]->value;
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
      ag.data[i] += sv * n.grad.data[i];
      sg.data[0] += av.data[i] * n.grad.data[i];
    }
  });
}

inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

inline Var relu(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    const Tensor& av = n.parents[0]->value;
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
      if (av.data[i] > 0.0) ag.data[i] += n.grad.data[i];
  });
}

inline Var sigmoid(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [saved](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
      double s = saved.data[i];
      ag.data[i] += n.grad.data[i] * s * (1.0 - s);
    }
  });
}

inline Var exp_op(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::exp(v);
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [saved](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
      ag.data[i] += n.grad.data[i] * saved.data[i];
  });
}

inline Var log_op(Var a) {
  Tensor out = a->value;
  for (auto& v : out.data) v = std::log(v);
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    const Tensor& av = n.parents[0]->value;
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
      ag.data[i] += n.grad.data[i] / av.data[i];
  });
}

// ---- matrix ops ----

inline Var matmul(Var a, Var b) {
  std::size_t n = a->value.rows(), k = a->value.cols();
  std::size_t k2 = b->value.rows(), m = b->value.cols();
  detail::require(k == k2, "matmul",
                  "inner dims differ: " + a->value.shape_str() + " * " + b->value.shape_str());
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a->value.data[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &b->value.data[p * m];
      double* orow = &out.data[i * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  return detail::make_op(std::move(out), {a, b}, [n, k, m](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    Tensor& bg = nd.parents[1]->ensure_grad();
    const Tensor& av = nd.parents[0]->value;
    const Tensor& bv = nd.parents[1]->value;
    // dA = dOut * B^T ; dB = A^T * dOut
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double g = nd.grad.data[i * m + j];
        if (g == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ag.data[i * k + p] += g * bv.data[p * m + j];
          bg.data[p * m + j] += g * av.data[i * k + p];
        }
      }
  });
}

// a: [n x d], b: [m x d]  ->  a * b^T : [n x m]
inline Var matmul_nt(Var a, Var b) {
  std::size_t n = a->value.rows(), d = a->value.cols();
  std::size_t m = b->value.rows(), d2 = b->value.cols();
  detail::require(d == d2, "matmul_nt",
                  "inner dims differ: " + a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      const double* ar = &a->value.data[i * d];
      const double* br = &b->value.data[j * d];
      for (std::size_t p = 0; p < d; ++p) s += ar[p] * br[p];
      out.data[i * m + j] = s;
    }
  return detail::make_op(std::move(out), {a, b}, [n, d, m](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    Tensor& bg = nd.parents[1]->ensure_grad();
    const Tensor& av = nd.parents[0]->value;
    const Tensor& bv = nd.parents[1]->value;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double g = nd.grad.data[i * m + j];
        if (g == 0.0) continue;
        for (std::size_t p = 0; p < d; ++p) {
          ag.data[i * d + p] += g * bv.data[j * d + p];
          bg.data[j * d + p] += g * av.data[i * d + p];
        }
      }
  });
}

// x: [n x d] (or [d]), W: [d x m], b: [m]
inline Var affine(Var x, Var w, Var b) {
  bool vec = x->value.shape.size() == 1;
  Var xm = x;
  if (vec) {
    Tensor t = x->value;
    t.shape = {1, t.data.size()};
    xm = detail::make_op(std::move(t), {x}, [](Node& n) {
      detail::accumulate(n.parents[0], n.grad);
    });
  }
  Var y = add_rowvec(matmul(xm, w), b);
  if (!vec) return y;
  Tensor t = y->value;
  t.shape = {t.data.size()};
  return detail::make_op(std::move(t), {y}, [](Node& n) {
    detail::accumulate(n.parents[0], n.grad);
  });
}

// ---- shape ops ----

inline Var reshape(Var a, std::vector<std::size_t> shape) {
  detail::require(Tensor::numel_of(shape) == a->value.numel(), "reshape", "numel mismatch");
  Tensor out = a->value;
  out.shape = std::move(shape);
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    detail::accumulate(n.parents[0], n.grad);
  });
}

inline Var slice_rows(Var a, std::size_t off, std::size_t count) {
  std::size_t d = a->value.cols();
  detail::require(off + count <= a->value.rows(), "slice_rows", "range out of bounds");
  Tensor out = Tensor::zeros({count, d});
  std::copy_n(&a->value.data[off * d], count * d, out.data.begin());
  return detail::make_op(std::move(out), {a}, [off, count, d](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < count * d; ++i) ag.data[off * d + i] += n.grad.data[i];
  });
}

// single row as a vector [d]
inline Var row_of(Var a, std::size_t r) {
  std::size_t d = a->value.cols();
  detail::require(r < a->value.rows(), "row_of", "row out of bounds");
  Tensor out = Tensor::zeros({d});
  std::copy_n(&a->value.data[r * d], d, out.data.begin());
  return detail::make_op(std::move(out), {a}, [r, d](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < d; ++i) ag.data[r * d + i] += n.grad.data[i];
  });
}

inline Var slice_cols(Var a, std::size_t off, std::size_t count) {
  std::size_t n = a->value.rows(), d = a->value.cols();
  detail::require(off + count <= d, "slice_cols", "range out of bounds");
  Tensor out = Tensor::zeros({n, count});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(&a->value.data[i * d + off], count, &out.data[i * count]);
  return detail::make_op(std::move(out), {a}, [n, d, off, count](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j)
        ag.data[i * d + off + j] += nd.grad.data[i * count + j];
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "concat_cols", "empty input");
  std::size_t n = parts[0]->value.rows(), total = 0;
  for (auto& p : parts) {
    detail::require(p->value.rows() == n, "concat_cols", "row count mismatch");
    total += p->value.cols();
  }
  Tensor out = Tensor::zeros({n, total});
  std::size_t off = 0;
  for (auto& p : parts) {
    std::size_t c = p->value.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(&p->value.data[i * c], c, &out.data[i * total + off]);
    off += c;
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return detail::make_op(std::move(out), std::move(parents), [n, total](Node& nd) {
    std::size_t off2 = 0;
    for (auto& p : nd.parents) {
      std::size_t c = p->value.cols();
      Tensor& pg = p->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
          pg.data[i * c + j] += nd.grad.data[i * total + off2 + j];
      off2 += c;
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "concat_rows", "empty input");
  std::size_t d = parts[0]->value.cols(), total = 0;
  for (auto& p : parts) {
    detail::require(p->value.cols() == d, "concat_rows", "col count mismatch");
    total += p->value.rows();
  }
  Tensor out = Tensor::zeros({total, d});
  std::size_t off = 0;
  for (auto& p : parts) {
    std::copy_n(p->value.data.begin(), p->value.numel(), &out.data[off * d]);
    off += p->value.rows();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return detail::make_op(std::move(out), std::move(parents), [d](Node& nd) {
    std::size_t off2 = 0;
    for (auto& p : nd.parents) {
      Tensor& pg = p->ensure_grad();
      for (std::size_t i = 0; i < p->value.numel(); ++i)
        pg.data[i] += nd.grad.data[off2 * d + i];
      off2 += p->value.rows();
    }
  });
}

// Gather rows of `table` at fixed integer ids. Gradient flows to the table.
inline Var embedding(Var table, const std::vector<int>& ids) {
  std::size_t d = table->value.cols();
  std::size_t v = table->value.rows();
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < v, "embedding",
                    "id out of range");
    std::copy_n(&table->value.data[static_cast<std::size_t>(ids[i]) * d], d, &out.data[i * d]);
  }
  return detail::make_op(std::move(out), {table}, [ids, d](Node& n) {
    Tensor& tg = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        tg.data[static_cast<std::size_t>(ids[i]) * d + j] += n.grad.data[i * d + j];
  });
}

// ---- reductions ----

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return detail::make_op(Tensor::scalar(s), {a}, [](Node& n) {
    Tensor& ag = n.parents[0]->ensure_grad();
    for (auto& v : ag.data) v += n.grad.data[0];
  });
}

inline Var mean_rows(Var a) {  // [n x d] -> [d]
  std::size_t n = a->value.rows(), d = a->value.cols();
  Tensor out = Tensor::zeros({d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[j] += a->value.data[i * d + j];
  for (auto& v : out.data) v /= static_cast<double>(n);
  return detail::make_op(std::move(out), {a}, [n, d](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        ag.data[i * d + j] += nd.grad.data[j] / static_cast<double>(n);
  });
}

inline Var pick(Var a, std::size_t index) {  // scalar element of a flat view
  detail::require(index < a->value.numel(), "pick", "index out of bounds");
  return detail::make_op(Tensor::scalar(a->value.data[index]), {a}, [index](Node& n) {
    n.parents[0]->ensure_grad().data[index] += n.grad.data[0];
  });
}

// ---- softmax / layer norm / normalization ----

// Row-wise softmax with an optional additive mask (same shape, typically 0 or
// -inf entries). Masked entries get exactly zero probability and gradient.
inline Var softmax_rows(Var a, const Tensor* mask = nullptr) {
  std::size_t n = a->value.rows(), d = a->value.cols();
  if (mask)
    detail::require(mask->rows() == n && mask->cols() == d, "softmax_rows",
                    "mask shape mismatch");
  Tensor out = Tensor::zeros({n, d});
  if (a->value.shape.size() == 1) out.shape = {d};
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < d; ++j) {
      double l = a->value.data[i * d + j] + (mask ? mask->data[i * d + j] : 0.0);
      mx = std::max(mx, l);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double l = a->value.data[i * d + j] + (mask ? mask->data[i * d + j] : 0.0);
      double e = std::isinf(l) && l < 0 ? 0.0 : std::exp(l - mx);
      out.data[i * d + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] /= z;
  }
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [saved, n, d](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        dot += nd.grad.data[i * d + j] * saved.data[i * d + j];
      for (std::size_t j = 0; j < d; ++j) {
        double s = saved.data[i * d + j];
        ag.data[i * d + j] += s * (nd.grad.data[i * d + j] - dot);
      }
    }
  });
}

// Row-wise layer normalization with learnable gain and bias (each [d]).
inline Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-6) {
  std::size_t n = a->value.rows(), d = a->value.cols();
  detail::require(gain->value.numel() == d && bias->value.numel() == d, "layer_norm_rows",
                  "gain/bias width mismatch");
  Tensor xhat = Tensor::zeros({n, d});
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += a->value.data[i * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = a->value.data[i * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j)
      xhat.data[i * d + j] = (a->value.data[i * d + j] - mu) * inv_std[i];
  }
  Tensor out = Tensor::zeros(a->value.shape);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] = xhat.data[i * d + j] * gain->value.data[j] + bias->value.data[j];
  return detail::make_op(std::move(out), {a, gain, bias},
                         [xhat, inv_std, n, d](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    Tensor& gg = nd.parents[1]->ensure_grad();
    Tensor& bg = nd.parents[2]->ensure_grad();
    const Tensor& gain_v = nd.parents[1]->value;
    for (std::size_t i = 0; i < n; ++i) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double dy = nd.grad.data[i * d + j] * gain_v.data[j];
        sum_dy += dy;
        sum_dy_xhat += dy * xhat.data[i * d + j];
        gg.data[j] += nd.grad.data[i * d + j] * xhat.data[i * d + j];
        bg.data[j] += nd.grad.data[i * d + j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        double dy = nd.grad.data[i * d + j] * gain_v.data[j];
        ag.data[i * d + j] += inv_std[i] *
            (dy - sum_dy / static_cast<double>(d) -
             xhat.data[i * d + j] * sum_dy_xhat / static_cast<double>(d));
      }
    }
  });
}

// Row-wise L2 normalization: each row scaled to unit norm. `eps` guards the
// all-zero row (which stays zero).
inline Var l2_normalize_rows(Var a, double eps = 1e-12) {
  std::size_t n = a->value.rows(), d = a->value.cols();
  Tensor out = Tensor::zeros(a->value.shape);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a->value.data[i * d + j] * a->value.data[i * d + j];
    norms[i] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] = a->value.data[i * d + j] / norms[i];
  }
  Tensor saved = out;
  return detail::make_op(std::move(out), {a}, [saved, norms, n, d](Node& nd) {
    Tensor& ag = nd.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        dot += nd.grad.data[i * d + j] * saved.data[i * d + j];
      for (std::size_t j = 0; j < d; ++j)
        ag.data[i * d + j] += (nd.grad.data[i * d + j] - dot * saved.data[i * d + j]) / norms[i];
    }
  });
}

// Scaled dot-product attention. q: [nq x dk], k: [nk x dk], v: [nk x dv].
// `key_mask`, when given, has nk entries; entries with key_mask[j] == 0 get
// -inf logits (used to mask PAD keys).
inline Var attention(Var q, Var k, Var v, const std::vector<double>* key_mask = nullptr) {
  std::size_t dk = q->value.cols();
  Var scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
  Var probs;
  if (key_mask) {
    std::size_t nq = q->value.rows(), nk = k->value.rows();
    detail::require(key_mask->size() == nk, "attention", "key mask length mismatch");
    Tensor mask = Tensor::zeros({nq, nk});
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j < nk; ++j)
        mask.data[i * nk + j] = (*key_mask)[j] != 0.0 ? 0.0 : -HUGE_VAL;
    probs = softmax_rows(scores, &mask);
  } else {
    probs = softmax_rows(scores);
  }
  return matmul(probs, v);
}

// -log of the probability assigned to `target` in a probability row.
inline Var nll_of_prob_row(Var probs, std::size_t target) {
  return scale(log_op(pick(probs, target)), -1.0);
}

// ---- backward pass ----

namespace detail {

inline void topo_collect(const Var& v, std::vector<Node*>& order,
                         std::unordered_set<Node*>& seen) {
  // iterative DFS; graphs can be deep
  std::vector<std::pair<Node*, std::size_t>> stack{{v.get(), 0}};
  if (seen.count(v.get())) return;
  seen.insert(v.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (!seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagate from a scalar loss. Accumulates into the grad buffers of every
// reachable node (leaves included); callers zero leaf grads between steps.
inline void backward(const Var& loss, double seed = 1.0) {
  if (!loss->value.is_scalar() && loss->value.numel() != 1)
    throw ShapeError("backward: loss is not a scalar, shape " + loss->value.shape_str());
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  detail::topo_collect(loss, order, seen);
  for (Node* n : order) n->ensure_grad();
  loss->grad.data[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// ---- parameter sets ----

// Named, ordered collection of leaf parameter nodes. The same leaf Vars are
// reused across graph builds so gradients land here; zero_grad between steps.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  Var ensure(const std::string& name, Tensor init) {
    auto it = params_.find(name);
    if (it != params_.end()) return it->second;
    Var v = make_leaf(std::move(init));
    v->ensure_grad();
    params_.emplace(name, v);
    return v;
  }

  Var get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("ParamSet: unknown parameter " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad() {
    for (auto& [name, v] : params_) {
      v->ensure_grad();
      std::fill(v->grad.data.begin(), v->grad.data.end(), 0.0);
    }
  }

  std::map<std::string, Var>& items() { return params_; }
  const std::map<std::string, Var>& items() const { return params_; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (auto& [k, v] : params_) n += v->value.numel();
    return n;
  }

  std::uint64_t rng_seed() const { return rng_seed_; }
  void set_rng_seed(std::uint64_t s) { rng_seed_ = s; }

 private:
  std::map<std::string, Var> params_;
  std::uint64_t rng_seed_;
};

// A graph description: a builder that wires params and inputs into named
// output Vars. Rebuilt per evaluation (dynamic tape).
using GraphFn = std::function<std::map<std::string, Var>(
    ParamSet&, const std::map<std::string, Tensor>&)>;

inline std::map<std::string, Tensor> forward_eval(const GraphFn& graph, ParamSet& params,
                                                  const std::map<std::string, Tensor>& inputs) {
  auto outs = graph(params, inputs);
  std::map<std::string, Tensor> result;
  for (auto& [name, v] : outs) {
    if (!v->value.all_finite())
      throw ValidationError("forward_eval: non-finite output " + name);
    result.emplace(name, v->value);
  }
  return result;
}

// Gradient of the named scalar output with respect to every parameter.
// Parameters off the loss path come back as exact zeros.
inline std::map<std::string, Tensor> backward_grad(const GraphFn& graph, ParamSet& params,
                                                   const std::map<std::string, Tensor>& inputs,
                                                   const std::string& loss_name) {
  auto outs = graph(params, inputs);
  auto it = outs.find(loss_name);
  if (it == outs.end()) throw ValidationError("backward_grad: no output named " + loss_name);
  if (it->second->value.numel() != 1)
    throw ShapeError("backward_grad: output " + loss_name + " is not scalar, shape " +
                     it->second->value.shape_str());
  params.zero_grad();
  backward(it->second);
  std::map<std::string, Tensor> grads;
  for (auto& [name, v] : params.items()) grads.emplace(name, v->grad);
  return grads;
}

// Central-difference check of backward_grad over every parameter component.
// Relative error uses a unit floor so near-zero gradients compare absolutely.
// Central-difference audit of every gradient component. max_per_param > 0
// restricts the audit to an evenly strided subsample of each tensor, for
// graphs too large to probe exhaustively.
inline double finite_diff_check(const GraphFn& graph, ParamSet& params,
                                const std::map<std::string, Tensor>& inputs,
                                const std::string& loss_name, double eps = 1e-6,
                                std::size_t max_per_param = 0) {
  auto grads = backward_grad(graph, params, inputs, loss_name);
  auto eval_loss = [&]() {
    auto outs = graph(params, inputs);
    return outs.at(loss_name)->value.data[0];
  };
  double worst = 0.0;
  for (auto& [name, v] : params.items()) {
    const Tensor& g = grads.at(name);
    std::size_t n = v->value.numel();
    std::size_t stride = 1;
    if (max_per_param > 0 && n > max_per_param) stride = (n + max_per_param - 1) / max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      double orig = v->value.data[i];
      v->value.data[i] = orig + eps;
      double fp = eval_loss();
      v->value.data[i] = orig - eps;
      double fm = eval_loss();
      v->value.data[i] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double denom = std::max({std::abs(g.data[i]), std::abs(numeric), 1.0});
      worst = std::max(worst, std::abs(g.data[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace entailkit
