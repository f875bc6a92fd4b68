#include "planx/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "planx/gemm.hpp"
#include "planx/threading.hpp"

namespace planx {

namespace {

template <typename T>
bool want_grad(const Tensor<T>& t) {
  return grad_enabled() && t.requires_grad;
}

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
std::shared_ptr<AVec<T>> copy_buffer(const Tensor<T>& t) {
  return std::make_shared<AVec<T>>(*t.data);
}

// cos/sin tables for a coordinate list: [n, pairs] each.
template <typename T>
struct TrigTable {
  std::shared_ptr<AVec<T>> c, s;
  int pairs = 0;
};

template <typename T>
TrigTable<T> make_trig(const RopeTable& table, const Coords& pos, bool semantic) {
  TrigTable<T> tt;
  tt.pairs = table.pairs();
  tt.c = std::make_shared<AVec<T>>(pos.size() * tt.pairs);
  tt.s = std::make_shared<AVec<T>>(pos.size() * tt.pairs);
  std::vector<double> ang(tt.pairs);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    table.angles(pos[i], semantic, ang.data());
    for (int p = 0; p < tt.pairs; ++p) {
      (*tt.c)[i * tt.pairs + p] = static_cast<T>(std::cos(ang[p]));
      (*tt.s)[i * tt.pairs + p] = static_cast<T>(std::sin(ang[p]));
    }
  }
  return tt;
}

// Rotate every head slice of buf [n, dm] in place; sign=-1 un-rotates.
template <typename T>
void rotate_heads(T* buf, int n, int dm, int heads, const TrigTable<T>& tt, int sign) {
  int dh = dm / heads;
  int pairs = dh / 2;
  for (int i = 0; i < n; ++i) {
    const T* ci = tt.c->data() + static_cast<std::size_t>(i) * pairs;
    const T* si = tt.s->data() + static_cast<std::size_t>(i) * pairs;
    for (int h = 0; h < heads; ++h) {
      T* row = buf + static_cast<std::size_t>(i) * dm + h * dh;
      for (int p = 0; p < pairs; ++p) {
        T x = row[2 * p], y = row[2 * p + 1];
        T c = ci[p], s = sign < 0 ? -si[p] : si[p];
        row[2 * p] = x * c - y * s;
        row[2 * p + 1] = x * s + y * c;
      }
    }
  }
}

template <typename T>
void copy_head(const T* src, T* dst, int n, int dm, int dh, int h) {
  for (int i = 0; i < n; ++i) {
    std::memcpy(dst + static_cast<std::size_t>(i) * dh,
                src + static_cast<std::size_t>(i) * dm + static_cast<std::size_t>(h) * dh,
                sizeof(T) * dh);
  }
}

template <typename T>
void add_head(const T* src, T* dst, int n, int dm, int dh, int h) {
  for (int i = 0; i < n; ++i) {
    T* d = dst + static_cast<std::size_t>(i) * dm + static_cast<std::size_t>(h) * dh;
    const T* s = src + static_cast<std::size_t>(i) * dh;
    for (int j = 0; j < dh; ++j) d[j] += s[j];
  }
}

// Scaled masked softmax over logit rows, in place. valid==nullptr means all
// keys valid. Rows with no valid key become all-zero.
template <typename T>
void softmax_logits(T* w, int sq, int sk, T sc, bool causal,
                    const std::vector<std::uint8_t>* valid) {
  int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && sq > 1)
  for (int i = 0; i < sq; ++i) {
    T* row = w + static_cast<std::size_t>(i) * sk;
    int limit = causal ? i + 1 : sk;
    T maxv = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < limit; ++j) {
      if (valid && !(*valid)[j]) continue;
      maxv = std::max(maxv, row[j] * sc);
    }
    T total = 0;
    for (int j = 0; j < sk; ++j) {
      bool ok = j < limit && (!valid || (*valid)[j]);
      T e = ok ? std::exp(row[j] * sc - maxv) : T(0);
      row[j] = e;
      total += e;
    }
    if (total > 0) {
      T inv = T(1) / total;
      for (int j = 0; j < sk; ++j) row[j] *= inv;
    }
  }
}

// dW (dot of upstream with values) -> dL (softmax jacobian), in place.
template <typename T>
void softmax_backward_rows(const T* w, T* dw, int sq, int sk) {
  int nt = max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && sq > 1)
  for (int i = 0; i < sq; ++i) {
    const T* wr = w + static_cast<std::size_t>(i) * sk;
    T* dr = dw + static_cast<std::size_t>(i) * sk;
    T dot = 0;
    for (int j = 0; j < sk; ++j) dot += wr[j] * dr[j];
    for (int j = 0; j < sk; ++j) dr[j] = wr[j] * (dr[j] - dot);
  }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape == b.shape, "add: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<T>& o) {
      for (int p = 0; p < 2; ++p) {
        Tensor<T>& t = o.node->parents[p];
        if (!t.requires_grad) continue;
        for (std::size_t i = 0; i < o.numel(); ++i) (*t.grad)[i] += (*o.grad)[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape == b.shape, "sub: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<T>& o) {
      Tensor<T>& a2 = o.node->parents[0];
      Tensor<T>& b2 = o.node->parents[1];
      for (std::size_t i = 0; i < o.numel(); ++i) {
        if (a2.requires_grad) (*a2.grad)[i] += (*o.grad)[i];
        if (b2.requires_grad) (*b2.grad)[i] -= (*o.grad)[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape == b.shape, "mul: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<T>& o) {
      Tensor<T>& a2 = o.node->parents[0];
      Tensor<T>& b2 = o.node->parents[1];
      for (std::size_t i = 0; i < o.numel(); ++i) {
        if (a2.requires_grad) (*a2.grad)[i] += (*o.grad)[i] * (*b2.data)[i];
        if (b2.requires_grad) (*b2.grad)[i] += (*o.grad)[i] * (*a2.data)[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = Tensor<T>::zeros(a.shape, want_grad(a));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * s;
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {a};
    out.node->backward = [s](Tensor<T>& o) {
      Tensor<T>& a2 = o.node->parents[0];
      for (std::size_t i = 0; i < o.numel(); ++i) (*a2.grad)[i] += (*o.grad)[i] * s;
    };
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros({1}, want_grad(a));
  T acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (*a.data)[i];
  (*out.data)[0] = acc;
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {a};
    out.node->backward = [](Tensor<T>& o) {
      Tensor<T>& a2 = o.node->parents[0];
      T g = (*o.grad)[0];
      for (std::size_t i = 0; i < a2.numel(); ++i) (*a2.grad)[i] += g;
    };
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  check(a.numel() > 0, "mean: empty tensor");
  Tensor<T> s = sum(a);
  return scale(s, T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> detach(const Tensor<T>& a) {
  Tensor<T> out;
  out.data = a.data;
  out.shape = a.shape;
  out.requires_grad = false;
  return out;
}

template <typename T>
Tensor<T> straight_through(const Tensor<T>& value, const Tensor<T>& grad_to) {
  check(value.shape == grad_to.shape, "straight_through: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros(value.shape, want_grad(grad_to));
  std::copy(value.data->begin(), value.data->end(), out.data->begin());
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {grad_to};
    out.node->backward = [](Tensor<T>& o) {
      Tensor<T>& t = o.node->parents[0];
      for (std::size_t i = 0; i < o.numel(); ++i) (*t.grad)[i] += (*o.grad)[i];
    };
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b) {
  check(x.shape.size() == 2 && w.shape.size() == 2, "linear: expects 2D tensors");
  const int s = x.shape[0], in = x.shape[1], out_dim = w.shape[1];
  check(w.shape[0] == in, "linear: inner dim mismatch");
  if (b) check(static_cast<int>(b->numel()) == out_dim, "linear: bias dim mismatch");

  bool rg = want_grad(x) || want_grad(w) || (b && want_grad(*b));
  Tensor<T> out = Tensor<T>::zeros({s, out_dim}, rg);
  gemm_nn(x.ptr(), w.ptr(), out.ptr(), s, in, out_dim, false);
  if (b) {
    for (int i = 0; i < s; ++i) {
      T* row = out.ptr() + static_cast<std::size_t>(i) * out_dim;
      for (int j = 0; j < out_dim; ++j) row[j] += (*b->data)[j];
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = b ? std::vector<Tensor<T>>{x, w, *b} : std::vector<Tensor<T>>{x, w};
    out.node->backward = [s, in, out_dim](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      Tensor<T>& w2 = o.node->parents[1];
      if (x2.requires_grad) gemm_nt(o.grad->data(), w2.ptr(), x2.grad->data(), s, out_dim, in, true);
      if (w2.requires_grad) gemm_tn(x2.ptr(), o.grad->data(), w2.grad->data(), in, s, out_dim, true);
      if (o.node->parents.size() == 3 && o.node->parents[2].requires_grad) {
        Tensor<T>& b2 = o.node->parents[2];
        for (int i = 0; i < s; ++i) {
          const T* row = o.grad->data() + static_cast<std::size_t>(i) * out_dim;
          for (int j = 0; j < out_dim; ++j) (*b2.grad)[j] += row[j];
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids,
                    const std::vector<std::uint8_t>* zero_mask) {
  check(table.shape.size() == 2, "embedding: table must be 2D");
  const int v = table.shape[0], d = table.shape[1];
  if (zero_mask) check(zero_mask->size() == ids.size(), "embedding: mask size mismatch");
  for (int id : ids) {
    if (id < 0 || id >= v) throw std::invalid_argument("embedding: id out of range");
  }
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(ids.size()), d}, want_grad(table));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (zero_mask && (*zero_mask)[i]) continue;
    std::memcpy(out.ptr() + i * d, table.ptr() + static_cast<std::size_t>(ids[i]) * d,
                sizeof(T) * d);
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {table};
    std::vector<std::uint8_t> zm = zero_mask ? *zero_mask : std::vector<std::uint8_t>();
    out.node->backward = [ids, zm, d](Tensor<T>& o) {
      Tensor<T>& t = o.node->parents[0];
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!zm.empty() && zm[i]) continue;
        T* dst = t.grad->data() + static_cast<std::size_t>(ids[i]) * d;
        const T* src = o.grad->data() + i * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& gain, double eps) {
  check(x.shape.size() == 2, "rmsnorm: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  check(static_cast<int>(gain.numel()) == d, "rmsnorm: gain dim mismatch");
  Tensor<T> out = Tensor<T>::zeros(x.shape, want_grad(x) || want_grad(gain));
  auto inv_rms = std::make_shared<AVec<T>>(s);
  for (int i = 0; i < s; ++i) {
    const T* row = x.ptr() + static_cast<std::size_t>(i) * d;
    T ms = 0;
    for (int j = 0; j < d; ++j) ms += row[j] * row[j];
    T inv = T(1) / std::sqrt(ms / d + static_cast<T>(eps));
    (*inv_rms)[i] = inv;
    T* orow = out.ptr() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) orow[j] = row[j] * inv * (*gain.data)[j];
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x, gain};
    out.node->backward = [s, d, inv_rms](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      Tensor<T>& g2 = o.node->parents[1];
      for (int i = 0; i < s; ++i) {
        const T* row = x2.ptr() + static_cast<std::size_t>(i) * d;
        const T* go = o.grad->data() + static_cast<std::size_t>(i) * d;
        T inv = (*inv_rms)[i];
        if (g2.requires_grad) {
          for (int j = 0; j < d; ++j) (*g2.grad)[j] += go[j] * row[j] * inv;
        }
        if (x2.requires_grad) {
          T dot = 0;
          for (int j = 0; j < d; ++j) dot += go[j] * (*g2.data)[j] * row[j];
          dot *= inv * inv * inv / d;
          T* gx = x2.grad->data() + static_cast<std::size_t>(i) * d;
          for (int j = 0; j < d; ++j) gx[j] += go[j] * (*g2.data)[j] * inv - row[j] * dot;
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape, want_grad(x));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    T v = (*x.data)[i];
    (*out.data)[i] = v / (T(1) + std::exp(-v));
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (std::size_t i = 0; i < o.numel(); ++i) {
        T v = (*x2.data)[i];
        T sig = T(1) / (T(1) + std::exp(-v));
        (*x2.grad)[i] += (*o.grad)[i] * sig * (T(1) + v * (T(1) - sig));
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> affine_rows(const Tensor<T>& x, const Tensor<T>& sc, const Tensor<T>& sh) {
  check(x.shape.size() == 2, "affine_rows: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  check(static_cast<int>(sc.numel()) == d && static_cast<int>(sh.numel()) == d,
        "affine_rows: dim mismatch");
  Tensor<T> out = Tensor<T>::zeros(x.shape, want_grad(x) || want_grad(sc) || want_grad(sh));
  for (int i = 0; i < s; ++i) {
    const T* row = x.ptr() + static_cast<std::size_t>(i) * d;
    T* orow = out.ptr() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) orow[j] = row[j] * (T(1) + (*sc.data)[j]) + (*sh.data)[j];
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x, sc, sh};
    out.node->backward = [s, d](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      Tensor<T>& sc2 = o.node->parents[1];
      Tensor<T>& sh2 = o.node->parents[2];
      for (int i = 0; i < s; ++i) {
        const T* go = o.grad->data() + static_cast<std::size_t>(i) * d;
        const T* row = x2.ptr() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
          if (x2.requires_grad) (*x2.grad)[static_cast<std::size_t>(i) * d + j] += go[j] * (T(1) + (*sc2.data)[j]);
          if (sc2.requires_grad) (*sc2.grad)[j] += go[j] * row[j];
          if (sh2.requires_grad) (*sh2.grad)[j] += go[j];
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& v) {
  check(x.shape.size() == 2, "add_row: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  check(static_cast<int>(v.numel()) == d, "add_row: dim mismatch");
  Tensor<T> out = Tensor<T>::zeros(x.shape, want_grad(x) || want_grad(v));
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < d; ++j) {
      (*out.data)[static_cast<std::size_t>(i) * d + j] =
          (*x.data)[static_cast<std::size_t>(i) * d + j] + (*v.data)[j];
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x, v};
    out.node->backward = [s, d](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      Tensor<T>& v2 = o.node->parents[1];
      for (int i = 0; i < s; ++i) {
        const T* go = o.grad->data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
          if (x2.requires_grad) (*x2.grad)[static_cast<std::size_t>(i) * d + j] += go[j];
          if (v2.requires_grad) (*v2.grad)[j] += go[j];
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  check(x.shape.size() == 2, "softmax_rows: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  Tensor<T> out = Tensor<T>::zeros(x.shape, want_grad(x));
  for (int i = 0; i < s; ++i) {
    const T* row = x.ptr() + static_cast<std::size_t>(i) * d;
    T* orow = out.ptr() + static_cast<std::size_t>(i) * d;
    T maxv = row[0];
    for (int j = 1; j < d; ++j) maxv = std::max(maxv, row[j]);
    T total = 0;
    for (int j = 0; j < d; ++j) {
      orow[j] = std::exp(row[j] - maxv);
      total += orow[j];
    }
    for (int j = 0; j < d; ++j) orow[j] /= total;
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [s, d](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (int i = 0; i < s; ++i) {
        const T* w = o.ptr() + static_cast<std::size_t>(i) * d;
        const T* go = o.grad->data() + static_cast<std::size_t>(i) * d;
        T dot = 0;
        for (int j = 0; j < d; ++j) dot += w[j] * go[j];
        T* gx = x2.grad->data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) gx[j] += w[j] * (go[j] - dot);
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int offset, int len) {
  check(x.shape.size() == 2, "slice_cols: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  check(offset >= 0 && len > 0 && offset + len <= d, "slice_cols: invalid range");
  Tensor<T> out = Tensor<T>::zeros({s, len}, want_grad(x));
  for (int i = 0; i < s; ++i) {
    std::memcpy(out.ptr() + static_cast<std::size_t>(i) * len,
                x.ptr() + static_cast<std::size_t>(i) * d + offset, sizeof(T) * len);
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [s, d, offset, len](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (int i = 0; i < s; ++i) {
        T* dst = x2.grad->data() + static_cast<std::size_t>(i) * d + offset;
        const T* src = o.grad->data() + static_cast<std::size_t>(i) * len;
        for (int j = 0; j < len; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> mean_pool_grid(const Tensor<T>& x, int grid, int factor) {
  check(x.shape.size() == 2 && x.shape[0] == grid * grid, "mean_pool_grid: shape mismatch");
  check(factor >= 1 && grid % factor == 0, "mean_pool_grid: invalid factor");
  const int d = x.shape[1];
  const int g = grid / factor;
  Tensor<T> out = Tensor<T>::zeros({g * g, d}, want_grad(x));
  const T inv = T(1) / static_cast<T>(factor * factor);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      T* orow = out.ptr() + (static_cast<std::size_t>(r) * g + c) * d;
      for (int rr = 0; rr < factor; ++rr) {
        for (int cc = 0; cc < factor; ++cc) {
          const T* row =
              x.ptr() + (static_cast<std::size_t>(r * factor + rr) * grid + c * factor + cc) * d;
          for (int j = 0; j < d; ++j) orow[j] += row[j];
        }
      }
      for (int j = 0; j < d; ++j) orow[j] *= inv;
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [grid, factor, d, g, inv](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
          const T* go = o.grad->data() + (static_cast<std::size_t>(r) * g + c) * d;
          for (int rr = 0; rr < factor; ++rr) {
            for (int cc = 0; cc < factor; ++cc) {
              T* gx = x2.grad->data() +
                      (static_cast<std::size_t>(r * factor + rr) * grid + c * factor + cc) * d;
              for (int j = 0; j < d; ++j) gx[j] += go[j] * inv;
            }
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> upsample_grid(const Tensor<T>& x, int grid, int factor) {
  check(x.shape.size() == 2 && x.shape[0] == grid * grid, "upsample_grid: shape mismatch");
  check(factor >= 1, "upsample_grid: invalid factor");
  const int d = x.shape[1];
  const int g = grid * factor;
  Tensor<T> out = Tensor<T>::zeros({g * g, d}, want_grad(x));
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const T* row = x.ptr() + (static_cast<std::size_t>(r / factor) * grid + c / factor) * d;
      std::memcpy(out.ptr() + (static_cast<std::size_t>(r) * g + c) * d, row, sizeof(T) * d);
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [grid, factor, d, g](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
          T* gx = x2.grad->data() + (static_cast<std::size_t>(r / factor) * grid + c / factor) * d;
          const T* go = o.grad->data() + (static_cast<std::size_t>(r) * g + c) * d;
          for (int j = 0; j < d; ++j) gx[j] += go[j];
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& rows) {
  check(x.shape.size() == 2, "gather_rows: expects 2D input");
  const int s = x.shape[0], d = x.shape[1];
  for (int r : rows) {
    if (r < 0 || r >= s) throw std::invalid_argument("gather_rows: row out of range");
  }
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(rows.size()), d}, want_grad(x));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.ptr() + i * d, x.ptr() + static_cast<std::size_t>(rows[i]) * d,
                sizeof(T) * d);
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [rows, d](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        T* dst = x2.grad->data() + static_cast<std::size_t>(rows[i]) * d;
        const T* src = o.grad->data() + i * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> masked_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                               const std::vector<std::uint8_t>& mask) {
  check(logits.shape.size() == 2, "masked_cross_entropy: expects 2D logits");
  const int s = logits.shape[0], v = logits.shape[1];
  check(static_cast<int>(targets.size()) == s && static_cast<int>(mask.size()) == s,
        "masked_cross_entropy: length mismatch");
  int n_masked = 0;
  for (int i = 0; i < s; ++i) {
    if (!mask[i]) continue;
    ++n_masked;
    if (targets[i] < 0 || targets[i] >= v)
      throw std::invalid_argument("masked_cross_entropy: target out of range");
  }
  check(n_masked > 0, "masked_cross_entropy: empty mask");

  // softmax rows for masked positions, kept for the backward pass
  auto probs = std::make_shared<AVec<T>>(static_cast<std::size_t>(n_masked) * v);
  auto rows = std::make_shared<std::vector<int>>();
  rows->reserve(n_masked);
  T total = 0;
  int mrow = 0;
  for (int i = 0; i < s; ++i) {
    if (!mask[i]) continue;
    const T* row = logits.ptr() + static_cast<std::size_t>(i) * v;
    T maxv = row[0];
    for (int j = 1; j < v; ++j) maxv = std::max(maxv, row[j]);
    if (!std::isfinite(static_cast<double>(maxv)))
      throw std::invalid_argument("masked_cross_entropy: non-finite logits");
    T* prow = probs->data() + static_cast<std::size_t>(mrow) * v;
    T z = 0;
    for (int j = 0; j < v; ++j) {
      prow[j] = std::exp(row[j] - maxv);
      z += prow[j];
    }
    for (int j = 0; j < v; ++j) prow[j] /= z;
    total += -(row[targets[i]] - maxv - std::log(z));
    rows->push_back(i);
    ++mrow;
  }

  Tensor<T> out = Tensor<T>::zeros({1}, want_grad(logits));
  (*out.data)[0] = total / static_cast<T>(n_masked);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {logits};
    out.node->backward = [probs, rows, targets, v, n_masked](Tensor<T>& o) {
      Tensor<T>& l2 = o.node->parents[0];
      T g = (*o.grad)[0] / static_cast<T>(n_masked);
      for (std::size_t m = 0; m < rows->size(); ++m) {
        int i = (*rows)[m];
        const T* prow = probs->data() + m * v;
        T* grow = l2.grad->data() + static_cast<std::size_t>(i) * v;
        for (int j = 0; j < v; ++j) grow[j] += g * prow[j];
        grow[targets[i]] -= g;
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int target) {
  check(logits.shape.size() == 1 || (logits.shape.size() == 2 && logits.shape[0] == 1),
        "cross_entropy: expects a logit vector");
  const int v = static_cast<int>(logits.numel());
  if (target < 0 || target >= v) throw std::invalid_argument("cross_entropy: target out of range");
  Tensor<T> flat = logits;
  flat.shape = {1, v};
  return masked_cross_entropy(flat, std::vector<int>{target}, std::vector<std::uint8_t>{1});
}

template <typename T>
Tensor<T> mse_rows(const Tensor<T>& pred, const Tensor<T>& target,
                   const std::vector<std::uint8_t>* row_mask) {
  check(pred.shape == target.shape, "mse_rows: shape mismatch");
  check(pred.shape.size() == 2, "mse_rows: expects 2D input");
  const int s = pred.shape[0], d = pred.shape[1];
  if (row_mask) check(static_cast<int>(row_mask->size()) == s, "mse_rows: mask length mismatch");
  std::size_t count = 0;
  T total = 0;
  for (int i = 0; i < s; ++i) {
    if (row_mask && !(*row_mask)[i]) continue;
    const T* p = pred.ptr() + static_cast<std::size_t>(i) * d;
    const T* t = target.ptr() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      T diff = p[j] - t[j];
      total += diff * diff;
    }
    count += d;
  }
  check(count > 0, "mse_rows: no rows selected");
  Tensor<T> out = Tensor<T>::zeros({1}, want_grad(pred) || want_grad(target));
  (*out.data)[0] = total / static_cast<T>(count);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {pred, target};
    std::vector<std::uint8_t> rm = row_mask ? *row_mask : std::vector<std::uint8_t>();
    out.node->backward = [s, d, count, rm](Tensor<T>& o) {
      Tensor<T>& p2 = o.node->parents[0];
      Tensor<T>& t2 = o.node->parents[1];
      T g = (*o.grad)[0] * T(2) / static_cast<T>(count);
      for (int i = 0; i < s; ++i) {
        if (!rm.empty() && !rm[i]) continue;
        for (int j = 0; j < d; ++j) {
          std::size_t idx = static_cast<std::size_t>(i) * d + j;
          T diff = (*p2.data)[idx] - (*t2.data)[idx];
          if (p2.requires_grad) (*p2.grad)[idx] += g * diff;
          if (t2.requires_grad) (*t2.grad)[idx] -= g * diff;
        }
      }
    };
  }
  return out;
}

namespace {

// Shared forward/backward for the attention variants. Keys are a single
// [sk, dm] buffer that has already been rotated where applicable.
template <typename T>
struct AttnSaved {
  std::shared_ptr<AVec<T>> qr, kr;        // rotated projections
  std::shared_ptr<AVec<T>> weights;       // [H, sq, sk] softmax rows
  TrigTable<T> qt, kt;                    // empty when no rotation
  std::shared_ptr<std::vector<std::uint8_t>> valid;
  int sq = 0, sk = 0, heads = 0, dm = 0;
  bool causal = false;
};

template <typename T>
void attn_forward(AttnSaved<T>& sv, const T* v, T* out) {
  const int dh = sv.dm / sv.heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  AVec<T> qh(static_cast<std::size_t>(sv.sq) * dh), kh(static_cast<std::size_t>(sv.sk) * dh),
      vh(static_cast<std::size_t>(sv.sk) * dh), oh(static_cast<std::size_t>(sv.sq) * dh);
  for (int h = 0; h < sv.heads; ++h) {
    copy_head(sv.qr->data(), qh.data(), sv.sq, sv.dm, dh, h);
    copy_head(sv.kr->data(), kh.data(), sv.sk, sv.dm, dh, h);
    copy_head(v, vh.data(), sv.sk, sv.dm, dh, h);
    T* w = sv.weights->data() + static_cast<std::size_t>(h) * sv.sq * sv.sk;
    gemm_nt(qh.data(), kh.data(), w, sv.sq, dh, sv.sk, false);
    softmax_logits(w, sv.sq, sv.sk, sc, sv.causal, sv.valid ? sv.valid.get() : nullptr);
    gemm_nn(w, vh.data(), oh.data(), sv.sq, sv.sk, dh, false);
    add_head(oh.data(), out, sv.sq, sv.dm, dh, h);
  }
}

// Accumulates gradients for q (pre-rotation), k (pre-rotation) and v.
template <typename T>
void attn_backward(const AttnSaved<T>& sv, const T* v, const T* dout, T* dq, T* dk, T* dv) {
  const int dh = sv.dm / sv.heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  AVec<T> qh(static_cast<std::size_t>(sv.sq) * dh), kh(static_cast<std::size_t>(sv.sk) * dh),
      vh(static_cast<std::size_t>(sv.sk) * dh), doh(static_cast<std::size_t>(sv.sq) * dh),
      dw(static_cast<std::size_t>(sv.sq) * sv.sk), tmpq(static_cast<std::size_t>(sv.sq) * dh),
      tmpk(static_cast<std::size_t>(sv.sk) * dh);
  AVec<T> dqr(static_cast<std::size_t>(sv.sq) * sv.dm, T(0));
  AVec<T> dkr(static_cast<std::size_t>(sv.sk) * sv.dm, T(0));
  for (int h = 0; h < sv.heads; ++h) {
    copy_head(sv.qr->data(), qh.data(), sv.sq, sv.dm, dh, h);
    copy_head(sv.kr->data(), kh.data(), sv.sk, sv.dm, dh, h);
    copy_head(v, vh.data(), sv.sk, sv.dm, dh, h);
    copy_head(dout, doh.data(), sv.sq, sv.dm, dh, h);
    const T* w = sv.weights->data() + static_cast<std::size_t>(h) * sv.sq * sv.sk;
    if (dv) {
      gemm_tn(w, doh.data(), tmpk.data(), sv.sk, sv.sq, dh, false);
      add_head(tmpk.data(), dv, sv.sk, sv.dm, dh, h);
    }
    gemm_nt(doh.data(), vh.data(), dw.data(), sv.sq, dh, sv.sk, false);
    softmax_backward_rows(w, dw.data(), sv.sq, sv.sk);
    for (auto& x : dw) x *= sc;
    if (dq) {
      gemm_nn(dw.data(), kh.data(), tmpq.data(), sv.sq, sv.sk, dh, false);
      add_head(tmpq.data(), dqr.data(), sv.sq, sv.dm, dh, h);
    }
    if (dk) {
      gemm_tn(dw.data(), qh.data(), tmpk.data(), sv.sk, sv.sq, dh, false);
      add_head(tmpk.data(), dkr.data(), sv.sk, sv.dm, dh, h);
    }
  }
  if (dq) {
    if (sv.qt.pairs > 0) rotate_heads(dqr.data(), sv.sq, sv.dm, sv.heads, sv.qt, -1);
    for (std::size_t i = 0; i < dqr.size(); ++i) dq[i] += dqr[i];
  }
  if (dk) {
    if (sv.kt.pairs > 0) rotate_heads(dkr.data(), sv.sk, sv.dm, sv.heads, sv.kt, -1);
    for (std::size_t i = 0; i < dkr.size(); ++i) dk[i] += dkr[i];
  }
}

}  // namespace

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    bool causal, const RopeTable* table, const Coords* q_pos, const Coords* k_pos,
                    bool k_semantic) {
  check(q.shape.size() == 2 && k.shape.size() == 2 && v.shape.size() == 2,
        "attention: expects 2D projections");
  const int sq = q.shape[0], dm = q.shape[1];
  const int sk = k.shape[0];
  check(k.shape[1] == dm && v.shape[1] == dm && v.shape[0] == sk, "attention: shape mismatch");
  check(heads > 0 && dm % heads == 0, "attention: head count must divide model dim");
  const int dh = dm / heads;
  if (table && table->head_dim != dh)
    throw std::invalid_argument("attention: rope head_dim mismatch");
  if (q_pos) check(static_cast<int>(q_pos->size()) == sq, "attention: q position count mismatch");
  if (k_pos) check(static_cast<int>(k_pos->size()) == sk, "attention: k position count mismatch");

  auto sv = AttnSaved<T>{};
  sv.sq = sq;
  sv.sk = sk;
  sv.heads = heads;
  sv.dm = dm;
  sv.causal = causal;
  sv.qr = copy_buffer(q);
  sv.kr = copy_buffer(k);
  if (table && q_pos) {
    sv.qt = make_trig<T>(*table, *q_pos, false);
    rotate_heads(sv.qr->data(), sq, dm, heads, sv.qt, +1);
  }
  if (table && k_pos) {
    sv.kt = make_trig<T>(*table, *k_pos, k_semantic);
    rotate_heads(sv.kr->data(), sk, dm, heads, sv.kt, +1);
  }
  sv.weights = std::make_shared<AVec<T>>(static_cast<std::size_t>(heads) * sq * sk);

  bool rg = want_grad(q) || want_grad(k) || want_grad(v);
  Tensor<T> out = Tensor<T>::zeros({sq, dm}, rg);
  if (sk > 0) attn_forward(sv, v.ptr(), out.ptr());
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {q, k, v};
    out.node->backward = [sv](Tensor<T>& o) {
      if (sv.sk == 0) return;
      Tensor<T>& q2 = o.node->parents[0];
      Tensor<T>& k2 = o.node->parents[1];
      Tensor<T>& v2 = o.node->parents[2];
      attn_backward(sv, v2.ptr(), o.grad->data(), q2.requires_grad ? q2.grad->data() : nullptr,
                    k2.requires_grad ? k2.grad->data() : nullptr,
                    v2.requires_grad ? v2.grad->data() : nullptr);
    };
  }
  return out;
}

template <typename T>
Tensor<T> dual_context_attention(const Tensor<T>& q, const Tensor<T>& k_text,
                                 const Tensor<T>& v_text, const Tensor<T>& k_sem,
                                 const Tensor<T>& v_sem, int heads, const RopeTable* table,
                                 const Coords* q_pos, const Coords* sem_pos,
                                 const std::vector<std::uint8_t>* sem_valid) {
  check(q.shape.size() == 2, "dual_context_attention: expects 2D projections");
  const int sq = q.shape[0], dm = q.shape[1];
  const int st = k_text.defined() ? k_text.shape[0] : 0;
  const int ss = k_sem.defined() ? k_sem.shape[0] : 0;
  if (st > 0) check(k_text.shape[1] == dm && v_text.shape[0] == st && v_text.shape[1] == dm,
                    "dual_context_attention: text shape mismatch");
  if (ss > 0) check(k_sem.shape[1] == dm && v_sem.shape[0] == ss && v_sem.shape[1] == dm,
                    "dual_context_attention: semantic shape mismatch");
  check(heads > 0 && dm % heads == 0, "dual_context_attention: head count must divide model dim");
  const int dh = dm / heads;
  if (table && table->head_dim != dh)
    throw std::invalid_argument("dual_context_attention: rope head_dim mismatch");
  if (sem_valid && ss > 0)
    check(static_cast<int>(sem_valid->size()) == ss, "dual_context_attention: valid mask mismatch");

  const int sk = st + ss;
  auto sv = AttnSaved<T>{};
  sv.sq = sq;
  sv.sk = sk;
  sv.heads = heads;
  sv.dm = dm;
  sv.causal = false;
  sv.qr = copy_buffer(q);
  if (table && q_pos) {
    check(static_cast<int>(q_pos->size()) == sq, "dual_context_attention: q position mismatch");
    sv.qt = make_trig<T>(*table, *q_pos, false);
    rotate_heads(sv.qr->data(), sq, dm, heads, sv.qt, +1);
  }

  // concatenated key/value buffers: text block first, semantic block after
  sv.kr = std::make_shared<AVec<T>>(static_cast<std::size_t>(sk) * dm);
  auto vcat = std::make_shared<AVec<T>>(static_cast<std::size_t>(sk) * dm);
  if (st > 0) {
    std::memcpy(sv.kr->data(), k_text.ptr(), sizeof(T) * st * dm);
    std::memcpy(vcat->data(), v_text.ptr(), sizeof(T) * st * dm);
  }
  if (ss > 0) {
    std::memcpy(sv.kr->data() + static_cast<std::size_t>(st) * dm, k_sem.ptr(),
                sizeof(T) * ss * dm);
    std::memcpy(vcat->data() + static_cast<std::size_t>(st) * dm, v_sem.ptr(),
                sizeof(T) * ss * dm);
    if (table && sem_pos) {
      check(static_cast<int>(sem_pos->size()) == ss,
            "dual_context_attention: semantic position mismatch");
      sv.kt = make_trig<T>(*table, *sem_pos, true);
      rotate_heads(sv.kr->data() + static_cast<std::size_t>(st) * dm, ss, dm, heads, sv.kt, +1);
    }
  }
  sv.valid = std::make_shared<std::vector<std::uint8_t>>(sk, 1);
  if (sem_valid) {
    for (int j = 0; j < ss; ++j) (*sv.valid)[st + j] = (*sem_valid)[j];
  }

  sv.weights = std::make_shared<AVec<T>>(static_cast<std::size_t>(heads) * sq * sk);
  bool rg = want_grad(q) || (st > 0 && (want_grad(k_text) || want_grad(v_text))) ||
            (ss > 0 && (want_grad(k_sem) || want_grad(v_sem)));
  Tensor<T> out = Tensor<T>::zeros({sq, dm}, rg);
  if (sk > 0) attn_forward(sv, vcat->data(), out.ptr());

  if (out.requires_grad) {
    Tensor<T> kt = st > 0 ? k_text : Tensor<T>::zeros({0, dm});
    Tensor<T> vt = st > 0 ? v_text : Tensor<T>::zeros({0, dm});
    Tensor<T> ks = ss > 0 ? k_sem : Tensor<T>::zeros({0, dm});
    Tensor<T> vs = ss > 0 ? v_sem : Tensor<T>::zeros({0, dm});
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {q, kt, vt, ks, vs};
    out.node->backward = [sv, vcat, st, ss, dm](Tensor<T>& o) {
      if (sv.sk == 0) return;
      Tensor<T>& q2 = o.node->parents[0];
      Tensor<T>& kt2 = o.node->parents[1];
      Tensor<T>& vt2 = o.node->parents[2];
      Tensor<T>& ks2 = o.node->parents[3];
      Tensor<T>& vs2 = o.node->parents[4];
      bool need_k = (st > 0 && kt2.requires_grad) || (ss > 0 && ks2.requires_grad);
      bool need_v = (st > 0 && vt2.requires_grad) || (ss > 0 && vs2.requires_grad);
      AVec<T> dkcat, dvcat;
      if (need_k) dkcat.assign(static_cast<std::size_t>(sv.sk) * dm, T(0));
      if (need_v) dvcat.assign(static_cast<std::size_t>(sv.sk) * dm, T(0));
      // Split the concatenated rotation: un-rotate semantic rows only.
      AttnSaved<T> local = sv;
      local.kt = TrigTable<T>{};  // handled below
      attn_backward(local, vcat->data(), o.grad->data(),
                    q2.requires_grad ? q2.grad->data() : nullptr,
                    need_k ? dkcat.data() : nullptr, need_v ? dvcat.data() : nullptr);
      if (need_k && ss > 0 && sv.kt.pairs > 0) {
        rotate_heads(dkcat.data() + static_cast<std::size_t>(st) * dm, ss, dm, sv.heads, sv.kt,
                     -1);
      }
      if (st > 0) {
        if (kt2.requires_grad)
          for (std::size_t i = 0; i < static_cast<std::size_t>(st) * dm; ++i)
            (*kt2.grad)[i] += dkcat[i];
        if (vt2.requires_grad)
          for (std::size_t i = 0; i < static_cast<std::size_t>(st) * dm; ++i)
            (*vt2.grad)[i] += dvcat[i];
      }
      if (ss > 0) {
        std::size_t off = static_cast<std::size_t>(st) * dm;
        if (ks2.requires_grad)
          for (std::size_t i = 0; i < static_cast<std::size_t>(ss) * dm; ++i)
            (*ks2.grad)[i] += dkcat[off + i];
        if (vs2.requires_grad)
          for (std::size_t i = 0; i < static_cast<std::size_t>(ss) * dm; ++i)
            (*vs2.grad)[i] += dvcat[off + i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, const Coords& pos, const RopeTable& table,
                     bool semantic) {
  std::vector<int> shape = x.shape;
  check(!shape.empty(), "rope_apply: empty tensor");
  int hd = shape.back();
  if (hd != table.head_dim) throw std::invalid_argument("rope_apply: head_dim mismatch");
  int n = static_cast<int>(x.numel()) / hd;
  check(static_cast<int>(pos.size()) == n, "rope_apply: position count mismatch");

  TrigTable<T> tt = make_trig<T>(table, pos, semantic);
  Tensor<T> out = Tensor<T>::zeros(shape, want_grad(x));
  std::copy(x.data->begin(), x.data->end(), out.data->begin());
  rotate_heads(out.ptr(), n, hd, 1, tt, +1);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = {x};
    out.node->backward = [tt, n, hd](Tensor<T>& o) {
      Tensor<T>& x2 = o.node->parents[0];
      AVec<T> g(o.grad->begin(), o.grad->end());
      rotate_heads(g.data(), n, hd, 1, tt, -1);
      for (std::size_t i = 0; i < g.size(); ++i) (*x2.grad)[i] += g[i];
    };
  }
  return out;
}

#define PLANX_INSTANTIATE(T)                                                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> detach(const Tensor<T>&);                                                    \
  template Tensor<T> straight_through(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                \
  template Tensor<T> embedding(const Tensor<T>&, const std::vector<int>&,                         \
                               const std::vector<std::uint8_t>*);                                 \
  template Tensor<T> rmsnorm(const Tensor<T>&, const Tensor<T>&, double);                         \
  template Tensor<T> silu(const Tensor<T>&);                                                      \
  template Tensor<T> affine_rows(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                              \
  template Tensor<T> slice_cols(const Tensor<T>&, int, int);                                      \
  template Tensor<T> mean_pool_grid(const Tensor<T>&, int, int);                                  \
  template Tensor<T> upsample_grid(const Tensor<T>&, int, int);                                   \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<int>&);                      \
  template Tensor<T> masked_cross_entropy(const Tensor<T>&, const std::vector<int>&,              \
                                          const std::vector<std::uint8_t>&);                      \
  template Tensor<T> cross_entropy(const Tensor<T>&, int);                                        \
  template Tensor<T> mse_rows(const Tensor<T>&, const Tensor<T>&,                                 \
                              const std::vector<std::uint8_t>*);                                  \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, bool,   \
                               const RopeTable*, const Coords*, const Coords*, bool);             \
  template Tensor<T> dual_context_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                            const Tensor<T>&, const Tensor<T>&, int,              \
                                            const RopeTable*, const Coords*, const Coords*,       \
                                            const std::vector<std::uint8_t>*);                    \
  template Tensor<T> rope_apply(const Tensor<T>&, const Coords&, const RopeTable&, bool);

PLANX_INSTANTIATE(float)
PLANX_INSTANTIATE(double)

#undef PLANX_INSTANTIATE

}  // namespace planx
