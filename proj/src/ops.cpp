#include "macn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace macn::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_string(t.shape()));
  }
}

double stable_sigmoid(double x) {
  x = std::clamp(x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-x));
}

// Elementwise unary op whose derivative is expressible from (x, y).
template <class Forward, class Derivative>
Tensor unary(Tape& tape, const Tensor& x, Forward f, Derivative df) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto yd = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = f(xd[i]);
  if (tape.wants({&x})) {
    tape.record(out, [x, out, df]() mutable {
      auto gy = out.grad();
      auto gx = x.grad();
      auto xv = x.data();
      auto yv = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] + bd[i];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.tracked()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto o = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] - bd[i];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.tracked()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto o = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] * bd[i];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out]() mutable {
      auto g = out.grad();
      auto av = a.data();
      auto bv = b.data();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.tracked()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("scale: factor must hold one value, got " + shape_string(s.shape()));
  const double k = s[0];
  Tensor out(x.shape());
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xd[i] * k;
  if (tape.wants({&x, &s})) {
    tape.record(out, [x, s, out]() mutable {
      auto g = out.grad();
      auto xv = x.data();
      if (x.tracked()) {
        auto gx = x.grad();
        const double kk = s[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * kk;
      }
      if (s.tracked()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
        s.grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double s) {
  return unary(tape, x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor one_minus(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(tape, x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor oneplus(Tape& tape, const Tensor& x) {
  return unary(
      tape, x,
      [](double v) { return 1.0 + (v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v))); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t group) {
  const std::size_t n = x.size();
  if (group == 0) group = n;
  if (n % group != 0) {
    throw ShapeError("softmax: group " + std::to_string(group) + " does not divide " + std::to_string(n));
  }
  Tensor out(x.shape());
  auto xd = x.data();
  auto yd = out.data();
  for (std::size_t g0 = 0; g0 < n; g0 += group) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = g0; i < g0 + group; ++i) mx = std::max(mx, xd[i]);
    double total = 0.0;
    for (std::size_t i = g0; i < g0 + group; ++i) {
      yd[i] = std::exp(xd[i] - mx);
      total += yd[i];
    }
    for (std::size_t i = g0; i < g0 + group; ++i) yd[i] /= total;
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, group]() mutable {
      auto gy = out.grad();
      auto gx = x.grad();
      auto y = out.data();
      for (std::size_t g0 = 0; g0 < y.size(); g0 += group) {
        double dot = 0.0;
        for (std::size_t i = g0; i < g0 + group; ++i) dot += gy[i] * y[i];
        for (std::size_t i = g0; i < g0 + group; ++i) gx[i] += y[i] * (gy[i] - dot);
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (tape.wants({&x})) {
    tape.record(out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& v : x.grad()) v += g;
    });
  }
  return out;
}

Tensor sum_squares(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  Tensor out = Tensor::scalar(acc);
  if (tape.wants({&x})) {
    tape.record(out, [x, out]() mutable {
      const double g = out.grad()[0];
      auto gx = x.grad();
      auto xv = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * g * xv[i];
    });
  }
  return out;
}

Tensor matvec(Tape& tape, const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec", "matrix");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (x.size() != n) {
    throw ShapeError("matvec: matrix " + shape_string(a.shape()) + " vs vector " + shape_string(x.shape()));
  }
  Tensor out({m});
  auto ad = a.data();
  auto xd = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = ad.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xd[j];
    o[i] = acc;
  }
  if (tape.wants({&a, &x})) {
    tape.record(out, [a, x, out, m, n]() mutable {
      auto g = out.grad();
      auto av = a.data();
      auto xv = x.data();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * xv[j];
      }
      if (x.tracked()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gx[j] += g[i] * av[i * n + j];
      }
    });
  }
  return out;
}

Tensor matvec_t(Tape& tape, const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec_t", "matrix");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (x.size() != m) {
    throw ShapeError("matvec_t: matrix " + shape_string(a.shape()) + " vs vector " + shape_string(x.shape()));
  }
  Tensor out({n});
  auto ad = a.data();
  auto xd = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[j] += ad[i * n + j] * xd[i];
  if (tape.wants({&a, &x})) {
    tape.record(out, [a, x, out, m, n]() mutable {
      auto g = out.grad();
      auto av = a.data();
      auto xv = x.data();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += xv[i] * g[j];
      }
      if (x.tracked()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j] * g[j];
          gx[i] += acc;
        }
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& w, const Tensor& x, const Tensor& b) {
  require_rank(w, 2, "linear", "weight");
  const std::size_t m = w.dim(0), n = w.dim(1);
  if (x.size() != n || b.size() != m) {
    throw ShapeError("linear: weight " + shape_string(w.shape()) + ", input " + shape_string(x.shape()) +
                     ", bias " + shape_string(b.shape()));
  }
  Tensor out({m});
  auto wd = w.data();
  auto xd = x.data();
  auto bd = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = wd.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xd[j];
    o[i] = acc + bd[i];
  }
  if (tape.wants({&w, &x, &b})) {
    tape.record(out, [w, x, b, out, m, n]() mutable {
      auto g = out.grad();
      auto wv = w.data();
      auto xv = x.data();
      if (w.tracked()) {
        auto gw = w.grad();
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* row = gw.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += gi * xv[j];
        }
      }
      if (x.tracked()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* row = wv.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) gx[j] += gi * row[j];
        }
      }
      if (b.tracked()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor outer(Tape& tape, const Tensor& a, const Tensor& b) {
  const std::size_t m = a.size(), n = b.size();
  Tensor out({m, n});
  auto o = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = ad[i] * bd[j];
  if (tape.wants({&a, &b})) {
    tape.record(out, [a, b, out, m, n]() mutable {
      auto g = out.grad();
      auto av = a.data();
      auto bv = b.data();
      if (a.tracked()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[j];
          ga[i] += acc;
        }
      }
      if (b.tracked()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j] * av[i];
      }
    });
  }
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, Shape shape) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  if (shape_size(shape) != total) {
    throw ShapeError("concat: parts hold " + std::to_string(total) + " values, target shape " +
                     shape_string(shape));
  }
  Tensor out(std::move(shape));
  auto o = out.data();
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(at));
    at += p.size();
  }
  if (tape.wants(parts)) {
    tape.record(out, [parts, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        if (p.tracked()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  return concat(tape, parts, Shape{total});
}

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  std::size_t channels = 0;
  const std::size_t h = parts.front().dim(1), w = parts.front().dim(2);
  for (const auto& p : parts) {
    require_rank(p, 3, "concat_channels", "input");
    if (p.dim(1) != h || p.dim(2) != w) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_string(p.shape()) + " vs " +
                       shape_string(parts.front().shape()));
    }
    channels += p.dim(0);
  }
  return concat(tape, parts, Shape{channels, h, w});
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length) {
  if (offset + length > x.size() || length == 0) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + shape_string(x.shape()));
  }
  Tensor out({length});
  auto xd = x.data();
  std::copy(xd.begin() + static_cast<std::ptrdiff_t>(offset),
            xd.begin() + static_cast<std::ptrdiff_t>(offset + length), out.data().begin());
  if (tape.wants({&x})) {
    tape.record(out, [x, out, offset]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  return concat(tape, {x}, std::move(shape));
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(kernel, 4, "conv2d", "kernel");
  const std::size_t ci_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t co_n = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != ci_n) {
    throw ShapeError("conv2d: input has " + std::to_string(ci_n) + " channels but kernel " +
                     shape_string(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("conv2d: kernel size must be odd, got " + shape_string(kernel.shape()));
  }
  if (bias.size() != co_n) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " for " + std::to_string(co_n) +
                     " output channels");
  }
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  const std::size_t hw = h * w;

  Tensor out({co_n, h, w});
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  double* o = out.data().data();
  for (std::size_t co = 0; co < co_n; ++co) {
    double* oc = o + co * hw;
    std::fill(oc, oc + hw, bias[co]);
    for (std::size_t ci = 0; ci < ci_n; ++ci) {
      const double* ic = in + ci * hw;
      const double* kc = k + (co * ci_n + ci) * kh * kw;
      for (long ky = 0; ky < static_cast<long>(kh); ++ky) {
        const long dy = ky - ph;
        const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
        for (long kx = 0; kx < static_cast<long>(kw); ++kx) {
          const long dx = kx - pw;
          const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
          const double wv = kc[ky * static_cast<long>(kw) + kx];
          for (long y = y0; y < y1; ++y) {
            double* dst = oc + y * W;
            const double* src = ic + (y + dy) * W + dx;
            for (long x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }

  if (tape.wants({&input, &kernel, &bias})) {
    tape.record(out, [input, kernel, bias, out, ci_n, co_n, kh, kw, ph, pw, H, W, hw]() mutable {
      const double* g = out.grad().data();
      const double* in = input.data().data();
      const double* k = kernel.data().data();
      double* gin = input.tracked() ? input.grad().data() : nullptr;
      double* gk = kernel.tracked() ? kernel.grad().data() : nullptr;
      if (bias.tracked()) {
        auto gb = bias.grad();
        for (std::size_t co = 0; co < co_n; ++co) {
          double acc = 0.0;
          for (std::size_t i = 0; i < hw; ++i) acc += g[co * hw + i];
          gb[co] += acc;
        }
      }
      for (std::size_t co = 0; co < co_n; ++co) {
        const double* gc = g + co * hw;
        for (std::size_t ci = 0; ci < ci_n; ++ci) {
          const double* ic = in + ci * hw;
          const std::size_t kbase = (co * ci_n + ci) * kh * kw;
          for (long ky = 0; ky < static_cast<long>(kh); ++ky) {
            const long dy = ky - ph;
            const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
            for (long kx = 0; kx < static_cast<long>(kw); ++kx) {
              const long dx = kx - pw;
              const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
              const std::size_t kidx = kbase + static_cast<std::size_t>(ky * static_cast<long>(kw) + kx);
              const double wv = k[kidx];
              double acc = 0.0;
              for (long y = y0; y < y1; ++y) {
                const double* gr = gc + y * W;
                const double* src = ic + (y + dy) * W + dx;
                if (gin) {
                  double* dst = gin + ci * hw + (y + dy) * W + dx;
                  for (long x = x0; x < x1; ++x) dst[x] += wv * gr[x];
                }
                for (long x = x0; x < x1; ++x) acc += gr[x] * src[x];
              }
              if (gk) gk[kidx] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor channel_max(Tape& tape, const Tensor& input) {
  require_rank(input, 3, "channel_max", "input");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2), hw = h * w;
  Tensor out({1, h, w});
  std::vector<std::size_t> arg(hw, 0);
  auto in = input.data();
  auto o = out.data();
  for (std::size_t p = 0; p < hw; ++p) {
    double best = in[p];
    std::size_t best_c = 0;
    for (std::size_t ch = 1; ch < c; ++ch) {
      if (in[ch * hw + p] > best) {
        best = in[ch * hw + p];
        best_c = ch;
      }
    }
    o[p] = best;
    arg[p] = best_c;
  }
  if (tape.wants({&input})) {
    tape.record(out, [input, out, arg = std::move(arg), hw]() mutable {
      auto g = out.grad();
      auto gi = input.grad();
      for (std::size_t p = 0; p < hw; ++p) gi[arg[p] * hw + p] += g[p];
    });
  }
  return out;
}

Tensor crop(Tape& tape, const Tensor& input, int row, int col, int k) {
  require_rank(input, 3, "crop", "input");
  if (k <= 0 || k % 2 == 0) throw ShapeError("crop: window must be odd and positive");
  const std::size_t c = input.dim(0);
  const int h = static_cast<int>(input.dim(1)), w = static_cast<int>(input.dim(2));
  const std::size_t kk = static_cast<std::size_t>(k);
  Tensor out({c, kk, kk});
  auto in = input.data();
  auto o = out.data();
  const int r0 = row - k / 2, c0 = col - k / 2;
  // (output index, input index) pairs of in-bounds cells
  std::vector<std::pair<std::size_t, std::size_t>> map;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int i = 0; i < k; ++i) {
      const int r = r0 + i;
      if (r < 0 || r >= h) continue;
      for (int j = 0; j < k; ++j) {
        const int cc = c0 + j;
        if (cc < 0 || cc >= w) continue;
        const std::size_t oi = (ch * kk + static_cast<std::size_t>(i)) * kk + static_cast<std::size_t>(j);
        const std::size_t ii = (ch * static_cast<std::size_t>(h) + static_cast<std::size_t>(r)) *
                                   static_cast<std::size_t>(w) +
                               static_cast<std::size_t>(cc);
        o[oi] = in[ii];
        map.emplace_back(oi, ii);
      }
    }
  }
  if (tape.wants({&input})) {
    tape.record(out, [input, out, map = std::move(map)]() mutable {
      auto g = out.grad();
      auto gi = input.grad();
      for (auto [oi, ii] : map) gi[ii] += g[oi];
    });
  }
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label) {
  const std::size_t n = logits.size();
  if (label >= n) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " for " + std::to_string(n) +
                            " classes");
  }
  auto z = logits.data();
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  const double log_norm = mx + std::log(total);
  Tensor out = Tensor::scalar(log_norm - z[label]);
  if (tape.wants({&logits})) {
    tape.record(out, [logits, out, label, log_norm]() mutable {
      const double g = out.grad()[0];
      auto zv = logits.data();
      auto gz = logits.grad();
      for (std::size_t i = 0; i < zv.size(); ++i) {
        gz[i] += g * (std::exp(zv[i] - log_norm) - (i == label ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

LstmOutput lstm_step(Tape& tape, const Tensor& x, const Tensor& h, const Tensor& c,
                     const LstmParams& params) {
  const std::size_t hidden = h.size();
  if (c.size() != hidden) throw ShapeError("lstm_step: h and c sizes differ");
  if (params.weight.rank() != 2 || params.weight.dim(0) != 4 * hidden ||
      params.weight.dim(1) != x.size() + hidden || params.bias.size() != 4 * hidden) {
    throw ShapeError("lstm_step: weight " + shape_string(params.weight.shape()) + " / bias " +
                     shape_string(params.bias.shape()) + " do not fit input " + std::to_string(x.size()) +
                     " and hidden " + std::to_string(hidden));
  }
  Tensor gates = linear(tape, params.weight, concat(tape, {x, h}), params.bias);
  Tensor i = sigmoid(tape, slice(tape, gates, 0, hidden));
  Tensor f = sigmoid(tape, slice(tape, gates, hidden, hidden));
  Tensor g = tanh(tape, slice(tape, gates, 2 * hidden, hidden));
  Tensor o = sigmoid(tape, slice(tape, gates, 3 * hidden, hidden));
  Tensor c_next = add(tape, mul(tape, f, c), mul(tape, i, g));
  Tensor h_next = mul(tape, o, tanh(tape, c_next));
  return {h_next, c_next};
}

}  // namespace macn::ops
