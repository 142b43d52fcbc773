#include "tst/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "tst/errors.hpp"

namespace tst {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

template <typename T>
using Backward = std::function<void(detail::Node<T>&)>;

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<NodePtr<T>> parents,
                      Backward<T> backward) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool track = grad_enabled() &&
               std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

// Grad buffer of a parent, or null when it does not take part in differentiation.
template <typename T>
T* grad_of(const NodePtr<T>& p) {
  return p->requires_grad ? p->ensure_grad().data() : nullptr;
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  int r = static_cast<int>(rank);
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return static_cast<std::size_t>(a);
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw DimensionError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    out[i] = std::max(ea, eb);
  }
  return out;
}

// For every element of `out`, the flat offset of the element of `in` that
// broadcasts onto it.
std::vector<std::size_t> broadcast_offsets(const Shape& in, const Shape& out) {
  std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    std::size_t oi = i + (rank - in.size());
    stride[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  std::vector<std::size_t> offsets(numel(out));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < offsets.size(); ++flat) {
    offsets[flat] = off;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) {
        off += stride[d];
        break;
      }
      off -= stride[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
  return offsets;
}

enum class BinaryKind { Add, Sub, Mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  std::size_t n = numel(out_shape);
  auto ad = a.data();
  auto bd = b.data();
  auto ia = std::make_shared<std::vector<std::size_t>>();
  auto ib = std::make_shared<std::vector<std::size_t>>();
  bool a_same = a.shape() == out_shape;
  bool b_same = b.shape() == out_shape;
  if (!a_same) *ia = broadcast_offsets(a.shape(), out_shape);
  if (!b_same) *ib = broadcast_offsets(b.shape(), out_shape);
  auto at = [&](std::size_t i) { return a_same ? ad[i] : ad[(*ia)[i]]; };
  auto bt = [&](std::size_t i) { return b_same ? bd[i] : bd[(*ib)[i]]; };

  std::vector<T> out(n);
  switch (kind) {
    case BinaryKind::Add:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) + bt(i);
      break;
    case BinaryKind::Sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) - bt(i);
      break;
    case BinaryKind::Mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) * bt(i);
      break;
  }
  auto pa = a.node();
  auto pb = b.node();
  return make_result<T>(out_shape, std::move(out), {pa, pb},
                        [pa, pb, ia, ib, a_same, b_same, kind](detail::Node<T>& self) {
    const auto& g = self.grad;
    std::size_t n = g.size();
    auto ai = [&](std::size_t i) { return a_same ? i : (*ia)[i]; };
    auto bi = [&](std::size_t i) { return b_same ? i : (*ib)[i]; };
    if (T* ga = grad_of(pa)) {
      if (kind == BinaryKind::Mul) {
        for (std::size_t i = 0; i < n; ++i) ga[ai(i)] += g[i] * pb->data[bi(i)];
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[ai(i)] += g[i];
      }
    }
    if (T* gb = grad_of(pb)) {
      switch (kind) {
        case BinaryKind::Add:
          for (std::size_t i = 0; i < n; ++i) gb[bi(i)] += g[i];
          break;
        case BinaryKind::Sub:
          for (std::size_t i = 0; i < n; ++i) gb[bi(i)] -= g[i];
          break;
        case BinaryKind::Mul:
          for (std::size_t i = 0; i < n; ++i) gb[bi(i)] += g[i] * pa->data[ai(i)];
          break;
      }
    }
  });
}

// Outer/inner extents around one axis of a row-major shape.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Add);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Sub);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Mul);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px, factor](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + value;
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xd[i]);
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * self.data[i];
  });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(xd[i]);
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] / px->data[i];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || as[as.size() - 1] != bs[bs.size() - 2])
    throw DimensionError("matmul: incompatible shapes " + to_string(as) + " and " + to_string(bs));
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t n = bs.back();
  auto pa = a.node();
  auto pb = b.node();

  using Map = Eigen::Map<RowMat<T>>;
  using CMap = Eigen::Map<const RowMat<T>>;

  if (bs.size() == 2) {
    // Shared right operand: fold all leading axes of `a` into rows.
    const std::size_t rows = a.size() / k;
    Shape out_shape(as.begin(), as.end() - 1);
    out_shape.push_back(n);
    std::vector<T> out(rows * n);
    Map(out.data(), rows, n).noalias() = CMap(pa->data.data(), rows, k) * CMap(pb->data.data(), k, n);
    return make_result<T>(std::move(out_shape), std::move(out), {pa, pb},
                          [pa, pb, rows, k, n](detail::Node<T>& self) {
      CMap g(self.grad.data(), rows, n);
      if (T* ga = grad_of(pa)) Map(ga, rows, k).noalias() += g * CMap(pb->data.data(), k, n).transpose();
      if (T* gb = grad_of(pb)) Map(gb, k, n).noalias() += CMap(pa->data.data(), rows, k).transpose() * g;
    });
  }

  Shape a_batch(as.begin(), as.end() - 2);
  Shape b_batch(bs.begin(), bs.end() - 2);
  Shape batch;
  try {
    batch = broadcast_shapes(a_batch, b_batch);
  } catch (const DimensionError&) {
    throw DimensionError("matmul: batch extents of " + to_string(as) + " and " + to_string(bs) +
                         " are not broadcastable");
  }
  std::vector<std::size_t> a_off, b_off;
  if (batch.empty()) {
    a_off = {0};
    b_off = {0};
  } else {
    a_off = broadcast_offsets(a_batch.empty() ? Shape{1} : a_batch, batch);
    b_off = broadcast_offsets(b_batch.empty() ? Shape{1} : b_batch, batch);
  }
  const std::size_t nb = a_off.size();
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<T> out(nb * m * n);
  for (std::size_t i = 0; i < nb; ++i) {
    Map(out.data() + i * m * n, m, n).noalias() =
        CMap(pa->data.data() + a_off[i] * m * k, m, k) * CMap(pb->data.data() + b_off[i] * k * n, k, n);
  }
  return make_result<T>(std::move(out_shape), std::move(out), {pa, pb},
                        [pa, pb, m, k, n, a_off = std::move(a_off), b_off = std::move(b_off)](detail::Node<T>& self) {
    T* ga = grad_of(pa);
    T* gb = grad_of(pb);
    for (std::size_t i = 0; i < a_off.size(); ++i) {
      CMap g(self.grad.data() + i * m * n, m, n);
      if (ga) Map(ga + a_off[i] * m * k, m, k).noalias() += g * CMap(pb->data.data() + b_off[i] * k * n, k, n).transpose();
      if (gb) Map(gb + b_off[i] * k * n, k, n).noalias() += CMap(pa->data.data() + a_off[i] * m * k, m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  auto px = x.node();
  return make_result<T>(std::move(shape), px->data, {px}, [px](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  const Shape& s = x.shape();
  const std::size_t rank = s.size();
  if (order.size() != rank) throw DimensionError("permute: order has wrong length for " + to_string(s));
  std::vector<bool> used(rank, false);
  for (auto o : order) {
    if (o >= rank || used[o]) throw DimensionError("permute: invalid axis order");
    used[o] = true;
  }
  std::vector<std::size_t> in_stride(rank);
  std::size_t st = 1;
  for (std::size_t i = rank; i-- > 0;) {
    in_stride[i] = st;
    st *= s[i];
  }
  Shape out_shape(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = s[order[i]];
    stride[i] = in_stride[order[i]];
  }
  auto src = std::make_shared<std::vector<std::size_t>>(x.size());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < src->size(); ++flat) {
    (*src)[flat] = off;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        off += stride[d];
        break;
      }
      off -= stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  auto xd = x.data();
  std::vector<T> out(src->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[(*src)[i]];
  auto px = x.node();
  return make_result<T>(std::move(out_shape), std::move(out), {px}, [px, src](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*src)[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  std::size_t rank = x.rank();
  if (rank < 2) throw DimensionError("transpose needs rank >= 2, got " + to_string(x.shape()));
  std::vector<std::size_t> order(rank);
  for (std::size_t i = 0; i < rank; ++i) order[i] = i;
  std::swap(order[rank - 1], order[rank - 2]);
  return permute(x, order);
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape)
    throw DimensionError("broadcast_to: " + to_string(x.shape()) + " does not expand to " + to_string(shape));
  auto src = std::make_shared<std::vector<std::size_t>>(broadcast_offsets(x.shape(), shape));
  auto xd = x.data();
  std::vector<T> out(src->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[(*src)[i]];
  auto px = x.node();
  return make_result<T>(shape, std::move(out), {px}, [px, src](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*src)[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape out_shape = first;
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != ax && s[i] != first[i]) ok = false;
    if (!ok) throw DimensionError("concat: " + to_string(s) + " incompatible with " + to_string(first));
    out_shape[ax] += s[ax];
  }
  AxisSplit out_split = split_at(out_shape, ax);
  std::vector<T> out(numel(out_shape));
  std::vector<NodePtr<T>> parents;
  std::vector<std::size_t> lens;
  std::size_t begin = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[ax];
    auto pd = p.data();
    const std::size_t block = len * out_split.inner;
    for (std::size_t o = 0; o < out_split.outer; ++o)
      std::copy_n(pd.begin() + o * block, block, out.begin() + (o * out_split.len + begin) * out_split.inner);
    parents.push_back(p.node());
    lens.push_back(len);
    begin += len;
  }
  auto captured = parents;
  return make_result<T>(std::move(out_shape), std::move(out), std::move(parents),
                        [captured, lens, out_split](detail::Node<T>& self) {
    std::size_t begin = 0;
    for (std::size_t j = 0; j < captured.size(); ++j) {
      const std::size_t block = lens[j] * out_split.inner;
      if (T* gp = grad_of(captured[j])) {
        for (std::size_t o = 0; o < out_split.outer; ++o) {
          const T* g = self.grad.data() + (o * out_split.len + begin) * out_split.inner;
          for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += g[i];
        }
      }
      begin += lens[j];
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  const std::size_t ax = normalize_axis(axis, s.size());
  if (begin >= end || end > s[ax])
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for extent " + std::to_string(s[ax]));
  AxisSplit sp = split_at(s, ax);
  Shape out_shape = s;
  out_shape[ax] = end - begin;
  const std::size_t block = (end - begin) * sp.inner;
  std::vector<T> out(sp.outer * block);
  auto xd = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xd.begin() + (o * sp.len + begin) * sp.inner, block, out.begin() + o * block);
  auto px = x.node();
  return make_result<T>(std::move(out_shape), std::move(out), {px},
                        [px, sp, begin, block](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < block; ++i) gx[(o * sp.len + begin) * sp.inner + i] += self.grad[o * block + i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total{0};
  for (T v : x.data()) total += v;
  auto px = x.node();
  return make_result<T>(Shape{1}, {total}, {px}, [px](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < px->data.size(); ++i) gx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const Shape& s = x.shape();
  AxisSplit sp = split_at(s, normalize_axis(axis, s.size()));
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      T mx = xd[base];
      for (std::size_t j = 1; j < sp.len; ++j) mx = std::max(mx, xd[base + j * sp.inner]);
      T z{0};
      for (std::size_t j = 0; j < sp.len; ++j) {
        T e = std::exp(xd[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] /= z;
    }
  }
  auto px = x.node();
  return make_result<T>(s, std::move(out), {px}, [px, sp](detail::Node<T>& self) {
    T* gx = grad_of(px);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        T dot{0};
        for (std::size_t j = 0; j < sp.len; ++j) dot += g[base + j * sp.inner] * y[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t i = base + j * sp.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
  const Shape& s = x.shape();
  AxisSplit sp = split_at(s, normalize_axis(axis, s.size()));
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      T mx = xd[base];
      for (std::size_t j = 1; j < sp.len; ++j) mx = std::max(mx, xd[base + j * sp.inner]);
      T z{0};
      for (std::size_t j = 0; j < sp.len; ++j) z += std::exp(xd[base + j * sp.inner] - mx);
      const T lse = mx + std::log(z);
      for (std::size_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] = xd[base + j * sp.inner] - lse;
    }
  }
  auto px = x.node();
  return make_result<T>(s, std::move(out), {px}, [px, sp](detail::Node<T>& self) {
    T* gx = grad_of(px);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        T gsum{0};
        for (std::size_t j = 0; j < sp.len; ++j) gsum += g[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t i = base + j * sp.inner;
          gx[i] += g[i] - std::exp(y[i]) * gsum;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t dim = x.extent(-1);
  if (gain.shape() != Shape{dim} || bias.shape() != Shape{dim})
    throw DimensionError("layer_norm: gain/bias must be (" + std::to_string(dim) + "), got " +
                         to_string(gain.shape()) + " and " + to_string(bias.shape()));
  const std::size_t rows = x.size() / dim;
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  auto xhat = std::make_shared<std::vector<T>>(xd.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * dim;
    double mu = 0.0;
    for (std::size_t j = 0; j < dim; ++j) mu += row[j];
    mu /= static_cast<double>(dim);
    const T mean_t = static_cast<T>(mu);
    double var = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = static_cast<double>(row[j] - mean_t);
      var += d * d;
    }
    var /= static_cast<double>(dim);
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    (*inv_std)[r] = istd;
    for (std::size_t j = 0; j < dim; ++j) {
      const T h = (row[j] - mean_t) * istd;
      (*xhat)[r * dim + j] = h;
      out[r * dim + j] = gd[j] * h + bd[j];
    }
  }
  auto px = x.node();
  auto pg = gain.node();
  auto pb = bias.node();
  return make_result<T>(x.shape(), std::move(out), {px, pg, pb},
                        [px, pg, pb, xhat, inv_std, rows, dim](detail::Node<T>& self) {
    const auto& g = self.grad;
    T* gx = grad_of(px);
    T* gg = grad_of(pg);
    T* gb = grad_of(pb);
    const auto& gain = pg->data;
    const T inv_dim = T(1) / static_cast<T>(dim);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* gr = g.data() + r * dim;
      const T* hr = xhat->data() + r * dim;
      if (gg)
        for (std::size_t j = 0; j < dim; ++j) gg[j] += gr[j] * hr[j];
      if (gb)
        for (std::size_t j = 0; j < dim; ++j) gb[j] += gr[j];
      if (gx) {
        T sum_dh{0}, sum_dh_h{0};
        for (std::size_t j = 0; j < dim; ++j) {
          const T dh = gr[j] * gain[j];
          sum_dh += dh;
          sum_dh_h += dh * hr[j];
        }
        const T istd = (*inv_std)[r];
        for (std::size_t j = 0; j < dim; ++j) {
          const T dh = gr[j] * gain[j];
          gx[r * dim + j] += istd * (dh - inv_dim * sum_dh - hr[j] * inv_dim * sum_dh_h);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * T(0.5) * (T(1) + std::erf(xd[i] * inv_sqrt2));
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px, inv_sqrt2](detail::Node<T>& self) {
    T* gx = grad_of(px);
    if (!gx) return;
    const T inv_sqrt_2pi = static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = px->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      gx[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, bool training, Rng* rng) {
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p_drop));
  if (!training || p_drop == 0.0) return x;
  if (rng == nullptr) throw UsageError("dropout in training mode needs a random generator");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p_drop));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto mask = std::make_shared<std::vector<T>>(x.size());
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = u(*rng) < p_drop ? T{0} : keep_scale;
    out[i] = xd[i] * (*mask)[i];
  }
  auto px = x.node();
  return make_result<T>(x.shape(), std::move(out), {px}, [px, mask](detail::Node<T>& self) {
    if (T* gx = grad_of(px))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
}

template <typename T>
Tensor<T> cross_entropy_with_logits(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy: logits must be [B, C], got " + to_string(logits.shape()));
  const std::size_t rows = logits.shape()[0];
  const std::size_t classes = logits.shape()[1];
  if (labels.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  for (std::size_t r = 0; r < rows; ++r)
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
      throw DataError("cross_entropy: label " + std::to_string(labels[r]) + " at row " + std::to_string(r) +
                      " outside [0, " + std::to_string(classes) + ")");
  auto xd = logits.data();
  auto probs = std::make_shared<std::vector<T>>(xd.size());
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * classes;
    T mx = *std::max_element(row, row + classes);
    T z{0};
    for (std::size_t c = 0; c < classes; ++c) {
      T e = std::exp(row[c] - mx);
      (*probs)[r * classes + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < classes; ++c) (*probs)[r * classes + c] /= z;
    total += mx + std::log(z) - row[labels[r]];
  }
  total /= static_cast<T>(rows);
  auto px = logits.node();
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result<T>(Shape{1}, {total}, {px}, [px, probs, lab, rows, classes](detail::Node<T>& self) {
    T* gx = grad_of(px);
    if (!gx) return;
    const T g = self.grad[0] / static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < classes; ++c) gx[r * classes + c] += g * (*probs)[r * classes + c];
      gx[r * classes + static_cast<std::size_t>(lab[r])] -= g;
    }
  });
}

double gelu_erf(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_tanh(double x) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

#define TST_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
  template Tensor<T> exp(const Tensor<T>&);                                                    \
  template Tensor<T> log(const Tensor<T>&);                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);               \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                               \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                   \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> softmax(const Tensor<T>&, int);                                           \
  template Tensor<T> log_softmax(const Tensor<T>&, int);                                       \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng*);                            \
  template Tensor<T> cross_entropy_with_logits(const Tensor<T>&, std::span<const int>);

TST_INSTANTIATE_OPS(float)
TST_INSTANTIATE_OPS(double)

#undef TST_INSTANTIATE_OPS

}  // namespace tst
