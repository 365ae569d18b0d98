#include "ecf/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecf/error.hpp"

namespace ecf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size())
        throw dimension_error(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                              to_string(shape));
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

bool is_suffix(const Shape& full, const Shape& suffix) {
    if (suffix.size() > full.size()) return false;
    return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw dimension_error(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                              to_string(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    auto mismatch = [&] {
        return dimension_error("matmul: shape mismatch " + to_string(as) + " x " + to_string(bs));
    };
    if (as.size() < 2 || bs.size() < 2) throw mismatch();

    if (bs.size() == 2) {
        const std::size_t k = as.back();
        const std::size_t n = bs[1];
        if (bs[0] != k) throw mismatch();
        const std::size_t rows = a.size() / k;
        Shape out_shape = as;
        out_shape.back() = n;
        std::vector<double> out(rows * n);
        MutMap(out.data(), rows, n).noalias() = ConstMap(a.data().data(), rows, k) * ConstMap(b.data().data(), k, n);
        return record(std::move(out_shape), std::move(out), {&a, &b},
                      [a, b, rows, k, n](const std::vector<double>& g) {
                          ConstMap gm(g.data(), rows, n);
                          if (a.requires_grad())
                              MutMap(grad_buffer(a).data(), rows, k).noalias() +=
                                  gm * ConstMap(b.data().data(), k, n).transpose();
                          if (b.requires_grad())
                              MutMap(grad_buffer(b).data(), k, n).noalias() +=
                                  ConstMap(a.data().data(), rows, k).transpose() * gm;
                      });
    }

    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1]) throw mismatch();
    const std::size_t batch = as[0], m = as[1], k = as[2], n = bs[2];
    std::vector<double> out(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i)
        MutMap(out.data() + i * m * n, m, n).noalias() =
            ConstMap(a.data().data() + i * m * k, m, k) * ConstMap(b.data().data() + i * k * n, k, n);
    return record({batch, m, n}, std::move(out), {&a, &b}, [a, b, batch, m, k, n](const std::vector<double>& g) {
        for (std::size_t i = 0; i < batch; ++i) {
            ConstMap gm(g.data() + i * m * n, m, n);
            if (a.requires_grad())
                MutMap(grad_buffer(a).data() + i * m * k, m, k).noalias() +=
                    gm * ConstMap(b.data().data() + i * k * n, k, n).transpose();
            if (b.requires_grad())
                MutMap(grad_buffer(b).data() + i * k * n, k, n).noalias() +=
                    ConstMap(a.data().data() + i * m * k, m, k).transpose() * gm;
        }
    });
}

Tensor transpose_last(const Tensor& x) {
    if (x.rank() < 2) throw dimension_error("transpose_last needs rank >= 2, got " + to_string(x.shape()));
    std::vector<std::size_t> axes(x.rank());
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
    return permute(x, axes);
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!is_suffix(a.shape(), b.shape()))
        throw dimension_error("add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    const std::size_t inner = b.size();
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % inner];
    return record(a.shape(), std::move(out), {&a, &b}, [a, b, inner](const std::vector<double>& g) {
        if (a.requires_grad()) {
            auto& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % inner] += g[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return record(a.shape(), std::move(out), {&a, &b}, [a, b](const std::vector<double>& g) {
        if (a.requires_grad()) {
            auto& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return record(a.shape(), std::move(out), {&a, &b}, [a, b](const std::vector<double>& g) {
        if (a.requires_grad()) {
            auto& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (auto& v : out) v *= factor;
    return record(x.shape(), std::move(out), {&x}, [x, factor](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
}

Tensor activation(Activation kind, const Tensor& x, double slope) {
    auto xv = x.data();
    std::vector<double> out(xv.size());
    switch (kind) {
        case Activation::relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
            break;
        case Activation::leaky_relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
            break;
        case Activation::sine:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(xv[i]);
            break;
        case Activation::identity:
            std::copy(xv.begin(), xv.end(), out.begin());
            break;
    }
    return record(x.shape(), std::move(out), {&x}, [x, kind, slope](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        auto xv = x.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double d = 1.0;
            switch (kind) {
                case Activation::relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::leaky_relu: d = xv[i] > 0.0 ? 1.0 : slope; break;
                case Activation::sine: d = std::cos(xv[i]); break;
                case Activation::identity: break;
            }
            gx[i] += g[i] * d;
        }
    });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const auto s = split_at(x.shape(), axis, "softmax");
    auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            double peak = xv[base];
            for (std::size_t j = 1; j < s.len; ++j) peak = std::max(peak, xv[base + j * s.inner]);
            double total = 0.0;
            for (std::size_t j = 0; j < s.len; ++j) {
                const double e = std::exp(xv[base + j * s.inner] - peak);
                out[base + j * s.inner] = e;
                total += e;
            }
            for (std::size_t j = 0; j < s.len; ++j) out[base + j * s.inner] /= total;
        }
    }
    auto y = std::make_shared<std::vector<double>>(out);
    return record(x.shape(), std::move(out), {&x}, [x, s, y](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        const auto& yv = *y;
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = o * s.len * s.inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < s.len; ++j) dot += g[base + j * s.inner] * yv[base + j * s.inner];
                for (std::size_t j = 0; j < s.len; ++j) {
                    const std::size_t idx = base + j * s.inner;
                    gx[idx] += yv[idx] * (g[idx] - dot);
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() == 0) throw dimension_error("layer_norm on a scalar");
    const std::size_t d = x.shape().back();
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
        throw dimension_error("layer_norm: gamma/beta " + to_string(gamma.shape()) + "/" + to_string(beta.shape()) +
                              " do not match last dimension of " + to_string(x.shape()));
    const std::size_t rows = x.size() / d;
    auto xv = x.data();
    auto gv = gamma.data();
    auto bv = beta.data();
    auto xhat = std::make_shared<std::vector<double>>(xv.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * is;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = gv[j] * h + bv[j];
        }
    }
    return record(x.shape(), std::move(out), {&x, &gamma, &beta},
                  [x, gamma, beta, xhat, inv_std, rows, d](const std::vector<double>& g) {
                      auto gv = gamma.data();
                      if (gamma.requires_grad()) {
                          auto& gg = grad_buffer(gamma);
                          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * (*xhat)[i];
                      }
                      if (beta.requires_grad()) {
                          auto& gb = grad_buffer(beta);
                          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                      }
                      if (!x.requires_grad()) return;
                      auto& gx = grad_buffer(x);
                      for (std::size_t r = 0; r < rows; ++r) {
                          double mean_dh = 0.0, mean_dh_h = 0.0;
                          for (std::size_t j = 0; j < d; ++j) {
                              const double dh = g[r * d + j] * gv[j];
                              mean_dh += dh;
                              mean_dh_h += dh * (*xhat)[r * d + j];
                          }
                          mean_dh /= static_cast<double>(d);
                          mean_dh_h /= static_cast<double>(d);
                          for (std::size_t j = 0; j < d; ++j) {
                              const double dh = g[r * d + j] * gv[j];
                              gx[r * d + j] += (*inv_std)[r] * (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
                          }
                      }
                  });
}

Tensor reduce(Reduction kind, const Tensor& x, std::size_t axis) {
    const auto s = split_at(x.shape(), axis, "reduce");
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    auto xv = x.data();
    std::vector<double> out(s.outer * s.inner);
    auto argmax = std::make_shared<std::vector<std::size_t>>();
    if (kind == Reduction::max) argmax->resize(out.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            const std::size_t dst = o * s.inner + in;
            if (kind == Reduction::max) {
                std::size_t best = 0;
                for (std::size_t j = 1; j < s.len; ++j)
                    if (xv[base + j * s.inner] > xv[base + best * s.inner]) best = j;
                (*argmax)[dst] = best;
                out[dst] = xv[base + best * s.inner];
            } else {
                double total = 0.0;
                for (std::size_t j = 0; j < s.len; ++j) total += xv[base + j * s.inner];
                out[dst] = kind == Reduction::mean ? total / static_cast<double>(s.len) : total;
            }
        }
    }
    return record(std::move(out_shape), std::move(out), {&x}, [x, s, kind, argmax](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = o * s.len * s.inner + in;
                const double gi = g[o * s.inner + in];
                if (kind == Reduction::max) {
                    gx[base + (*argmax)[o * s.inner + in] * s.inner] += gi;
                } else {
                    const double w = kind == Reduction::mean ? gi / static_cast<double>(s.len) : gi;
                    for (std::size_t j = 0; j < s.len; ++j) gx[base + j * s.inner] += w;
                }
            }
        }
    });
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw config_error("dropout probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    const double keep_scale = 1.0 / (1.0 - p);
    for (auto& m : *mask) m = unif(rng) < p ? 0.0 : keep_scale;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
    return record(x.shape(), std::move(out), {&x}, [x, mask](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
    });
}

Tensor mse_loss(const Tensor& reconstruction, const Tensor& target) {
    require_same_shape(reconstruction, target, "mse_loss");
    if (reconstruction.rank() == 0) throw dimension_error("mse_loss needs at least one axis");
    const double rows = static_cast<double>(reconstruction.dim(0));
    double total = 0.0;
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        const double r = reconstruction.data()[i] - target.data()[i];
        total += r * r;
    }
    return record({}, {total / rows}, {&reconstruction, &target},
                  [reconstruction, target, rows](const std::vector<double>& g) {
                      const double c = 2.0 * g[0] / rows;
                      for (const Tensor* t : {&reconstruction, &target}) {
                          if (!t->requires_grad()) continue;
                          auto& gt = grad_buffer(*t);
                          const double sign = t == &reconstruction ? 1.0 : -1.0;
                          for (std::size_t i = 0; i < gt.size(); ++i)
                              gt[i] += sign * c * (reconstruction.data()[i] - target.data()[i]);
                      }
                  });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        throw dimension_error("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return record(std::move(shape), std::move(out), {&x}, [x](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
    const auto& in_shape = x.shape();
    const std::size_t r = in_shape.size();
    {
        std::vector<bool> seen(r, false);
        bool ok = axes.size() == r;
        for (auto a : axes) {
            if (!ok || a >= r || seen[a]) {
                ok = false;
                break;
            }
            seen[a] = true;
        }
        if (!ok) throw dimension_error("permute: invalid axis order for shape " + to_string(in_shape));
    }
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
    Shape out_shape(r);
    std::vector<std::size_t> stride(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in_shape[axes[i]];
        stride[i] = in_stride[axes[i]];
    }
    const std::size_t n = x.size();
    auto source = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> counter(r, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < n; ++i) {
        (*source)[i] = src;
        for (std::size_t ax = r; ax-- > 0;) {
            src += stride[ax];
            if (++counter[ax] < out_shape[ax]) break;
            src -= stride[ax] * out_shape[ax];
            counter[ax] = 0;
        }
    }
    std::vector<double> out(n);
    auto xv = x.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[(*source)[i]];
    return record(std::move(out_shape), std::move(out), {&x}, [x, source](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[(*source)[i]] += g[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw dimension_error("concat of zero tensors");
    const Shape& first = parts.front().shape();
    split_at(first, axis, "concat");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        Shape probe = p.shape();
        if (probe.size() != first.size())
            throw dimension_error("concat: rank mismatch " + to_string(first) + " vs " + to_string(probe));
        probe[axis] = first[axis];
        if (probe != first)
            throw dimension_error("concat: shape mismatch " + to_string(first) + " vs " + to_string(p.shape()));
        out_shape[axis] += p.shape()[axis];
    }
    const auto s = split_at(out_shape, axis, "concat");
    std::vector<double> out(numel(out_shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t chunk = p.shape()[axis] * s.inner;
        offsets.push_back(offset);
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(p.data().data() + o * chunk, chunk, out.data() + o * s.len * s.inner + offset);
        offset += chunk;
    }
    return record(std::move(out_shape), std::move(out), parts, [parts, offsets, s, axis](const std::vector<double>& g) {
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const auto& p = parts[pi];
            if (!p.requires_grad()) continue;
            auto& gp = grad_buffer(p);
            const std::size_t chunk = p.shape()[axis] * s.inner;
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t j = 0; j < chunk; ++j) gp[o * chunk + j] += g[o * s.len * s.inner + offsets[pi] + j];
        }
    });
}

Tensor sum_all(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    return record({}, {total}, {&x}, [x](const std::vector<double>& g) {
        auto& gx = grad_buffer(x);
        for (auto& v : gx) v += g[0];
    });
}

}  // namespace ecf
