#include "cocoa/ops.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "cocoa/errors.hpp"

namespace cocoa {
namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw usage_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank)
    throw config_error(std::string(op) + ": expected rank " + std::to_string(rank) +
                       ", got shape " + shape_str(a.shape()));
}

Tape* joint_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* t = nullptr;
  for (const Tensor* x : inputs) {
    Tape* xt = x->tape();
    if (!xt) continue;
    if (t && xt != t) throw usage_error("operands belong to different gradient tapes");
    t = xt;
  }
  return t;
}

void attach(Tensor& out, Tape* tape, std::function<void()> backward_step) {
  if (!tape) return;
  out.impl()->tape = tape;
  tape->record(std::move(backward_step));
}

bool live(const Impl& x) { return x->tape != nullptr; }

// Unary elementwise with derivative computed from input and output values.
template <typename Fwd, typename Dfn>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfn dfn) {
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < ad.size(); ++i) od[i] = fwd(ad[i]);
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, dfn] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < ai->data.size(); ++i)
      ai->grad[i] += oi->grad[i] * dfn(ai->data[i], oi->data[i]);
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) bi->grad[i] += oi->grad[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) bi->grad[i] -= oi->grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] * bi->data[i];
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        bi->grad[i] += oi->grad[i] * ai->data[i];
    }
  });
  return out;
}

Tensor divide(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "divide");
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] / bd[i];
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] / bi->data[i];
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        bi->grad[i] -= oi->grad[i] * oi->data[i] / bi->data[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double k) {
  return unary_op(a, [k](double x) { return k * x; },
                  [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return x + c; },
                  [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary_op(a, [floor](double x) { return x > floor ? x : floor; },
                  [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = Tensor::scalar(s);
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    double g = oi->grad[0];
    for (double& gi : ai->grad) gi += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw usage_error("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_cols(const Tensor& a) {
  require_rank(a, 2, "sum_cols");
  std::size_t n = a.dim(0), m = a.dim(1);
  Tensor out = Tensor::zeros({n});
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += ad[i * m + j];
    od[i] = s;
  }
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, n, m] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ai->grad[i * m + j] += oi->grad[i];
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw config_error("matmul: inner dims disagree " + shape_str(a.shape()) + " . " +
                       shape_str(b.shape()));
  std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out = Tensor::zeros({n, m});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double x = ad[i * k + p];
      for (std::size_t j = 0; j < m; ++j) od[i * m + j] += x * bd[p * m + j];
    }
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi, n, k, m] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double g = oi->grad[i * m + j];
          for (std::size_t p = 0; p < k; ++p)
            ai->grad[i * k + p] += g * bi->data[p * m + j];
        }
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double x = ai->data[i * k + p];
          for (std::size_t j = 0; j < m; ++j)
            bi->grad[p * m + j] += x * oi->grad[i * m + j];
        }
    }
  });
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_tn");
  require_rank(b, 2, "matmul_tn");
  if (a.dim(0) != b.dim(0))
    throw config_error("matmul_tn: row counts disagree " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  std::size_t n = a.dim(0), d = a.dim(1), e = b.dim(1);
  Tensor out = Tensor::zeros({d, e});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      double x = ad[r * d + i];
      for (std::size_t j = 0; j < e; ++j) od[i * e + j] += x * bd[r * e + j];
    }
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi, n, d, e] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < e; ++j)
            s += oi->grad[i * e + j] * bi->data[r * e + j];
          ai->grad[r * d + i] += s;
        }
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) {
          double x = ai->data[r * d + i];
          for (std::size_t j = 0; j < e; ++j)
            bi->grad[r * e + j] += x * oi->grad[i * e + j];
        }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  std::size_t n = a.dim(0), m = a.dim(1);
  Tensor out = Tensor::zeros({m, n});
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) od[j * n + i] = ad[i * m + j];
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, n, m] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ai->grad[i * m + j] += oi->grad[j * n + i];
  });
  return out;
}

Tensor diag_part(const Tensor& a) {
  require_rank(a, 2, "diag_part");
  if (a.dim(0) != a.dim(1))
    throw config_error("diag_part: matrix not square " + shape_str(a.shape()));
  std::size_t n = a.dim(0);
  Tensor out = Tensor::zeros({n});
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) od[i] = ad[i * n + i];
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, n] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) ai->grad[i * n + i] += oi->grad[i];
  });
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw usage_error("concat_cols: no inputs");
  std::size_t n = parts[0].dim(0);
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != n)
      throw config_error("concat_cols: row counts disagree (" + std::to_string(p.dim(0)) +
                         " vs " + std::to_string(n) + ")");
    total += p.dim(1);
  }
  Tensor out = Tensor::zeros({n, total});
  auto od = out.data();
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    std::size_t w = p.dim(1);
    auto pd = p.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) od[i * total + col + j] = pd[i * w + j];
    col += w;
  }
  Tape* t = nullptr;
  {
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) {
      Tape* pt = p.tape();
      if (!pt) continue;
      if (t && pt != t) throw usage_error("concat_cols: mixed gradient tapes");
      t = pt;
    }
  }
  if (t) {
    std::vector<Impl> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    Impl oi = out.impl();
    out.impl()->tape = t;
    t->record([impls, oi, n, total] {
      if (oi->grad.empty()) return;
      std::size_t col = 0;
      for (const Impl& pi : impls) {
        std::size_t w = pi->shape[1];
        if (live(pi)) {
          pi->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
              pi->grad[i * w + j] += oi->grad[i * total + col + j];
        }
        col += w;
      }
    });
  }
  return out;
}

Tensor row_normalize(const Tensor& a) {
  require_rank(a, 2, "row_normalize");
  std::size_t n = a.dim(0), d = a.dim(1);
  Tensor out = Tensor::zeros({n, d});
  std::vector<double> norms(n);
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += ad[i * d + j] * ad[i * d + j];
    double nr = std::sqrt(s);
    if (nr == 0.0)
      throw numeric_error("row_normalize: zero-norm row " + std::to_string(i));
    norms[i] = nr;
    for (std::size_t j = 0; j < d; ++j) od[i * d + j] = ad[i * d + j] / nr;
  }
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, norms = std::move(norms), n, d] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        dot += oi->grad[i * d + j] * oi->data[i * d + j];
      for (std::size_t j = 0; j < d; ++j)
        ai->grad[i * d + j] +=
            (oi->grad[i * d + j] - oi->data[i * d + j] * dot) / norms[i];
    }
  });
  return out;
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "rowwise_dot");
  require_rank(a, 2, "rowwise_dot");
  std::size_t n = a.dim(0), d = a.dim(1);
  Tensor out = Tensor::zeros({n});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += ad[i * d + j] * bd[i * d + j];
    od[i] = s;
  }
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi, n, d] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          ai->grad[i * d + j] += oi->grad[i] * bi->data[i * d + j];
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          bi->grad[i * d + j] += oi->grad[i] * ai->data[i * d + j];
    }
  });
  return out;
}

Tensor gram(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "gram");
  require_rank(b, 2, "gram");
  if (a.dim(1) != b.dim(1))
    throw config_error("gram: embedding dims disagree " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  Tensor out = Tensor::zeros({n, m});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += ad[i * d + c] * bd[j * d + c];
      od[i * m + j] = s;
    }
  Tape* t = joint_tape({&a, &b});
  Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
  attach(out, t, [ai, bi, oi, n, m, d] {
    if (oi->grad.empty()) return;
    if (live(ai)) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double g = oi->grad[i * m + j];
          for (std::size_t c = 0; c < d; ++c)
            ai->grad[i * d + c] += g * bi->data[j * d + c];
        }
    }
    if (live(bi)) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double g = oi->grad[i * m + j];
          for (std::size_t c = 0; c < d; ++c)
            bi->grad[j * d + c] += g * ai->data[i * d + c];
        }
    }
  });
  return out;
}

Tensor upper_pairs_dot(const Tensor& a) {
  require_rank(a, 2, "upper_pairs_dot");
  std::size_t n = a.dim(0), d = a.dim(1);
  if (n < 2) throw config_error("upper_pairs_dot: need at least 2 rows");
  std::size_t pairs = n * (n - 1) / 2;
  Tensor out = Tensor::zeros({pairs});
  auto ad = a.data();
  auto od = out.data();
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += ad[i * d + c] * ad[j * d + c];
      od[p] = s;
    }
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, n, d] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++p) {
        double g = oi->grad[p];
        for (std::size_t c = 0; c < d; ++c) {
          ai->grad[i * d + c] += g * ai->data[j * d + c];
          ai->grad[j * d + c] += g * ai->data[i * d + c];
        }
      }
  });
  return out;
}

Tensor standardize_cols(const Tensor& a, double eps,
                        std::vector<std::size_t>* zero_variance_dims) {
  require_rank(a, 2, "standardize_cols");
  if (eps <= 0.0) throw config_error("standardize_cols: eps must be > 0");
  std::size_t n = a.dim(0), d = a.dim(1);
  if (n < 2) throw config_error("standardize_cols: need at least 2 rows");
  Tensor out = Tensor::zeros({n, d});
  std::vector<double> inv_std(d);
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += ad[i * d + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = ad[i * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    if (var == 0.0 && zero_variance_dims) zero_variance_dims->push_back(j);
    double s = 1.0 / std::sqrt(var + eps);
    inv_std[j] = s;
    for (std::size_t i = 0; i < n; ++i) od[i * d + j] = (ad[i * d + j] - mu) * s;
  }
  Tape* t = joint_tape({&a});
  Impl ai = a.impl(), oi = out.impl();
  attach(out, t, [ai, oi, inv_std = std::move(inv_std), n, d] {
    if (oi->grad.empty()) return;
    ai->ensure_grad();
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
      double gsum = 0.0, gysum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        gsum += oi->grad[i * d + j];
        gysum += oi->grad[i * d + j] * oi->data[i * d + j];
      }
      for (std::size_t i = 0; i < n; ++i) {
        double g = oi->grad[i * d + j];
        double y = oi->data[i * d + j];
        ai->grad[i * d + j] += inv_std[j] * (g - inv_n * gsum - y * inv_n * gysum);
      }
    }
  });
  return out;
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_rank(input, 3, "conv1d");
  require_rank(kernel, 3, "conv1d");
  require_rank(bias, 1, "conv1d");
  std::size_t n = input.dim(0), tlen = input.dim(1), cin = input.dim(2);
  std::size_t k = kernel.dim(0), kcin = kernel.dim(1), f = kernel.dim(2);
  if (cin != kcin)
    throw config_error("conv1d: input channels " + std::to_string(cin) +
                       " != kernel channels " + std::to_string(kcin));
  if (bias.dim(0) != f)
    throw config_error("conv1d: bias size " + std::to_string(bias.dim(0)) +
                       " != filter count " + std::to_string(f));
  if (tlen < k)
    throw config_error("conv1d: window length " + std::to_string(tlen) +
                       " shorter than kernel " + std::to_string(k));
  std::size_t tout = tlen - k + 1;
  Tensor out = Tensor::zeros({n, tout, f});
  auto in = input.data();
  auto ker = kernel.data();
  auto bs = bias.data();
  auto od = out.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t t0 = 0; t0 < tout; ++t0) {
      double* orow = &od[(b * tout + t0) * f];
      for (std::size_t j = 0; j < f; ++j) orow[j] = bs[j];
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* irow = &in[(b * tlen + t0 + kk) * cin];
        const double* krow = &ker[kk * cin * f];
        for (std::size_t c = 0; c < cin; ++c) {
          double x = irow[c];
          const double* kf = &krow[c * f];
          for (std::size_t j = 0; j < f; ++j) orow[j] += x * kf[j];
        }
      }
    }
  Tape* tp = joint_tape({&input, &kernel, &bias});
  Impl ii = input.impl(), ki = kernel.impl(), bi = bias.impl(), oi = out.impl();
  attach(out, tp, [ii, ki, bi, oi, n, tlen, cin, k, f, tout] {
    if (oi->grad.empty()) return;
    bool gin = live(ii), gker = live(ki), gbias = live(bi);
    if (gin) ii->ensure_grad();
    if (gker) ki->ensure_grad();
    if (gbias) bi->ensure_grad();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t0 = 0; t0 < tout; ++t0) {
        const double* grow = &oi->grad[(b * tout + t0) * f];
        if (gbias)
          for (std::size_t j = 0; j < f; ++j) bi->grad[j] += grow[j];
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* irow = &ii->data[(b * tlen + t0 + kk) * cin];
          const double* krow = &ki->data[kk * cin * f];
          double* ig = gin ? &ii->grad[(b * tlen + t0 + kk) * cin] : nullptr;
          double* kg = gker ? &ki->grad[kk * cin * f] : nullptr;
          for (std::size_t c = 0; c < cin; ++c) {
            if (gin) {
              const double* kf = &krow[c * f];
              double s = 0.0;
              for (std::size_t j = 0; j < f; ++j) s += grow[j] * kf[j];
              ig[c] += s;
            }
            if (gker) {
              double x = irow[c];
              double* kf = &kg[c * f];
              for (std::size_t j = 0; j < f; ++j) kf[j] += x * grow[j];
            }
          }
        }
      }
  });
  return out;
}

Tensor layer_norm(const Tensor& input, const Tensor& gain, const Tensor& shift, double eps) {
  require_rank(input, 3, "layer_norm");
  require_rank(gain, 1, "layer_norm");
  require_rank(shift, 1, "layer_norm");
  if (eps <= 0.0) throw config_error("layer_norm: eps must be > 0");
  std::size_t n = input.dim(0), tlen = input.dim(1), c = input.dim(2);
  if (gain.dim(0) != c || shift.dim(0) != c)
    throw config_error("layer_norm: gain/shift size must be " + std::to_string(c));
  std::size_t rows = n * tlen;
  Tensor out = Tensor::zeros({n, tlen, c});
  std::vector<double> inv_std(rows), norm(rows * c);
  auto in = input.data();
  auto gd = gain.data();
  auto sd = shift.data();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &in[r * c];
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double s = 1.0 / std::sqrt(var + eps);
    inv_std[r] = s;
    for (std::size_t j = 0; j < c; ++j) {
      double y = (row[j] - mu) * s;
      norm[r * c + j] = y;
      od[r * c + j] = y * gd[j] + sd[j];
    }
  }
  Tape* tp = joint_tape({&input, &gain, &shift});
  Impl ii = input.impl(), gi = gain.impl(), si = shift.impl(), oi = out.impl();
  attach(out, tp,
         [ii, gi, si, oi, rows, c, inv_std = std::move(inv_std), norm = std::move(norm)] {
           if (oi->grad.empty()) return;
           bool gin = live(ii), ggain = live(gi), gshift = live(si);
           if (gin) ii->ensure_grad();
           if (ggain) gi->ensure_grad();
           if (gshift) si->ensure_grad();
           double inv_c = 1.0 / static_cast<double>(c);
           for (std::size_t r = 0; r < rows; ++r) {
             const double* grow = &oi->grad[r * c];
             const double* yrow = &norm[r * c];
             if (ggain)
               for (std::size_t j = 0; j < c; ++j) gi->grad[j] += grow[j] * yrow[j];
             if (gshift)
               for (std::size_t j = 0; j < c; ++j) si->grad[j] += grow[j];
             if (gin) {
               // dL/dy_j = g_j * gain_j; standard layer-norm backward over the row
               double gsum = 0.0, gysum = 0.0;
               for (std::size_t j = 0; j < c; ++j) {
                 double gy = grow[j] * gi->data[j];
                 gsum += gy;
                 gysum += gy * yrow[j];
               }
               for (std::size_t j = 0; j < c; ++j) {
                 double gy = grow[j] * gi->data[j];
                 ii->grad[r * c + j] +=
                     inv_std[r] * (gy - inv_c * gsum - yrow[j] * inv_c * gysum);
               }
             }
           }
         });
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense");
  require_rank(weight, 2, "dense");
  require_rank(bias, 1, "dense");
  if (input.dim(1) != weight.dim(0))
    throw config_error("dense: input width " + std::to_string(input.dim(1)) +
                       " != weight rows " + std::to_string(weight.dim(0)));
  if (bias.dim(0) != weight.dim(1))
    throw config_error("dense: bias size " + std::to_string(bias.dim(0)) +
                       " != weight cols " + std::to_string(weight.dim(1)));
  std::size_t n = input.dim(0), m = weight.dim(1);
  Tensor out = matmul(input, weight);
  // broadcast-add the bias
  auto od = out.data();
  auto bd = bias.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) od[i * m + j] += bd[j];
  Tape* tp = joint_tape({&input, &weight, &bias});
  Impl bi = bias.impl(), oi = out.impl();
  if (tp) oi->tape = tp;
  if (tp && live(bi)) {
    tp->record([bi, oi, n, m] {
      if (oi->grad.empty()) return;
      bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) bi->grad[j] += oi->grad[i * m + j];
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 3, "global_avg_pool");
  std::size_t n = input.dim(0), tlen = input.dim(1), c = input.dim(2);
  if (tlen < 1) throw config_error("global_avg_pool: empty time axis");
  Tensor out = Tensor::zeros({n, c});
  auto in = input.data();
  auto od = out.data();
  double inv_t = 1.0 / static_cast<double>(tlen);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t t0 = 0; t0 < tlen; ++t0)
      for (std::size_t j = 0; j < c; ++j)
        od[b * c + j] += in[(b * tlen + t0) * c + j] * inv_t;
  Tape* tp = joint_tape({&input});
  Impl ii = input.impl(), oi = out.impl();
  attach(out, tp, [ii, oi, n, tlen, c, inv_t] {
    if (oi->grad.empty()) return;
    ii->ensure_grad();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t0 = 0; t0 < tlen; ++t0)
        for (std::size_t j = 0; j < c; ++j)
          ii->grad[(b * tlen + t0) * c + j] += oi->grad[b * c + j] * inv_t;
  });
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n)
    throw input_error("softmax_cross_entropy: " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(n) + " rows");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= c)
      throw input_error("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                        " out of range [0," + std::to_string(c) + ")");
  auto ld = logits.data();
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &ld[i * c];
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    loss -= std::log(probs[i * c + labels[i]]);
  }
  loss /= static_cast<double>(n);
  Tensor out = Tensor::scalar(loss);
  Tape* tp = joint_tape({&logits});
  Impl li = logits.impl(), oi = out.impl();
  std::vector<std::uint32_t> labels_copy(labels.begin(), labels.end());
  attach(out, tp,
         [li, oi, probs = std::move(probs), labels_copy = std::move(labels_copy), n, c] {
           if (oi->grad.empty()) return;
           li->ensure_grad();
           double g = oi->grad[0] / static_cast<double>(n);
           for (std::size_t i = 0; i < n; ++i)
             for (std::size_t j = 0; j < c; ++j) {
               double p = probs[i * c + j];
               li->grad[i * c + j] += g * (p - (labels_copy[i] == j ? 1.0 : 0.0));
             }
         });
  return out;
}

}  // namespace cocoa
