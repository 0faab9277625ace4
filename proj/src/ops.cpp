#include "pixtime/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pixtime/errors.hpp"

namespace pixtime::ops {

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// c[n, k] += g[n, m] * b[k, m]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t m, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g + i * m;
        double* crow = c + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * m;
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                s += grow[j] * brow[j];
            }
            crow[p] += s;
        }
    }
}

// c[k, m] += a[n, k]^T * g[n, m]
void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * m;
            for (std::size_t j = 0; j < m; ++j) {
                crow[j] += av * grow[j];
            }
        }
    }
}

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw DimensionError(msg);
    }
}

std::size_t product(const Shape& s, std::size_t from, std::size_t to) {
    std::size_t p = 1;
    for (std::size_t i = from; i < to; ++i) {
        p *= s[i];
    }
    return p;
}

struct MatmulPlan {
    std::size_t batch = 1;
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t m = 0;
    bool a_shared = false;
    bool b_shared = false;
    Shape out;
};

MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
    const std::string both = shape_str(a) + " and " + shape_str(b);
    require(a.size() >= 2 && b.size() >= 2, "matmul needs rank >= 2 operands, got " + both);
    MatmulPlan p;
    p.n = a[a.size() - 2];
    p.k = a.back();
    p.m = b.back();
    require(b[b.size() - 2] == p.k, "matmul inner dimensions differ: " + both);
    const Shape lead_a(a.begin(), a.end() - 2);
    const Shape lead_b(b.begin(), b.end() - 2);
    const std::size_t pa = shape_size(lead_a);
    const std::size_t pb = shape_size(lead_b);
    Shape lead;
    if (lead_a == lead_b) {
        lead = lead_a;
        p.batch = pa;
    } else if (pb == 1) {
        lead = lead_a;
        p.batch = pa;
        p.b_shared = true;
    } else if (pa == 1) {
        lead = lead_b;
        p.batch = pb;
        p.a_shared = true;
    } else {
        throw DimensionError("matmul batch dimensions cannot broadcast: " + both);
    }
    if (p.batch == 1) {
        p.a_shared = true;
        p.b_shared = true;
    }
    p.out = lead;
    p.out.push_back(p.n);
    p.out.push_back(p.m);
    return p;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    const NDArray& av = a.value();
    const NDArray& bv = b.value();
    const MatmulPlan p = plan_matmul(av.shape, bv.shape);
    NDArray out(p.out);
    const std::size_t sa = p.a_shared ? 0 : p.n * p.k;
    const std::size_t sb = p.b_shared ? 0 : p.k * p.m;
    const std::size_t sc = p.n * p.m;
    for (std::size_t i = 0; i < p.batch; ++i) {
        gemm_nn(av.data.data() + i * sa, bv.data.data() + i * sb, out.data.data() + i * sc, p.n, p.k, p.m);
    }
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return a.tape().record("matmul", std::move(out), {a, b},
                           [p, ia, ib, sa, sb, sc](Tape& t, const NDArray&, const NDArray& g) {
                               if (t.requires_grad(ia)) {
                                   const NDArray& bv = t.value(ib);
                                   NDArray& da = t.grad_slot(ia);
                                   for (std::size_t i = 0; i < p.batch; ++i) {
                                       gemm_nt(g.data.data() + i * sc, bv.data.data() + i * sb,
                                               da.data.data() + i * sa, p.n, p.m, p.k);
                                   }
                               }
                               if (t.requires_grad(ib)) {
                                   const NDArray& av = t.value(ia);
                                   NDArray& db = t.grad_slot(ib);
                                   for (std::size_t i = 0; i < p.batch; ++i) {
                                       gemm_tn(av.data.data() + i * sa, g.data.data() + i * sc,
                                               db.data.data() + i * sb, p.n, p.k, p.m);
                                   }
                               }
                           });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const NDArray& xv = x.value();
    const NDArray& wv = w.value();
    require(xv.rank() >= 1 && wv.rank() == 2 && xv.shape.back() == wv.shape[0],
            "linear input " + shape_str(xv.shape) + " incompatible with weight " + shape_str(wv.shape));
    const std::size_t in = wv.shape[0];
    const std::size_t outd = wv.shape[1];
    const std::size_t rows = xv.size() / in;
    const bool has_bias = b.valid();
    if (has_bias) {
        require(b.value().shape == Shape{outd},
                "linear bias " + shape_str(b.value().shape) + " does not match output width " + std::to_string(outd));
    }
    Shape out_shape = xv.shape;
    out_shape.back() = outd;
    NDArray out(out_shape);
    if (has_bias) {
        const NDArray& bv = b.value();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * outd));
        }
    }
    gemm_nn(xv.data.data(), wv.data.data(), out.data.data(), rows, in, outd);

    const std::size_t ix = x.id();
    const std::size_t iw = w.id();
    const std::size_t ibias = has_bias ? b.id() : 0;
    auto backprop = [=](Tape& t, const NDArray&, const NDArray& g) {
        if (t.requires_grad(ix)) {
            gemm_nt(g.data.data(), t.value(iw).data.data(), t.grad_slot(ix).data.data(), rows, outd, in);
        }
        if (t.requires_grad(iw)) {
            gemm_tn(t.value(ix).data.data(), g.data.data(), t.grad_slot(iw).data.data(), rows, in, outd);
        }
        if (has_bias && t.requires_grad(ibias)) {
            NDArray& db = t.grad_slot(ibias);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* grow = g.data.data() + r * outd;
                for (std::size_t j = 0; j < outd; ++j) {
                    db.data[j] += grow[j];
                }
            }
        }
    };
    if (has_bias) {
        return x.tape().record("linear", std::move(out), {x, w, b}, backprop);
    }
    return x.tape().record("linear", std::move(out), {x, w}, backprop);
}

Var add(const Var& a, const Var& b) {
    const NDArray& av = a.value();
    const NDArray& bv = b.value();
    const bool a_big = av.rank() >= bv.rank();
    const NDArray& big = a_big ? av : bv;
    const NDArray& small = a_big ? bv : av;
    const bool suffix = std::equal(small.shape.rbegin(), small.shape.rend(), big.shape.rbegin());
    require(suffix, "add cannot broadcast " + shape_str(av.shape) + " with " + shape_str(bv.shape));
    const std::size_t s = small.size();
    NDArray out(big.shape);
    for (std::size_t i = 0; i < big.size(); ++i) {
        out.data[i] = av.rank() >= bv.rank() ? av.data[i] + bv.data[i % s] : av.data[i % s] + bv.data[i];
    }
    const std::size_t ibig = a_big ? a.id() : b.id();
    const std::size_t ismall = a_big ? b.id() : a.id();
    return a.tape().record("add", std::move(out), {a, b}, [ibig, ismall, s](Tape& t, const NDArray&, const NDArray& g) {
        t.accumulate(ibig, g);
        if (t.requires_grad(ismall)) {
            NDArray& ds = t.grad_slot(ismall);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ds.data[i % s] += g.data[i];
            }
        }
    });
}

Var scale(const Var& a, double factor) {
    NDArray out = a.value();
    for (double& v : out.data) {
        v *= factor;
    }
    const std::size_t ia = a.id();
    return a.tape().record("scale", std::move(out), {a}, [ia, factor](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& da = t.grad_slot(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da.data[i] += factor * g.data[i];
        }
    });
}

Var transpose_last2(const Var& a) {
    const NDArray& av = a.value();
    require(av.rank() >= 2, "transpose needs rank >= 2, got " + shape_str(av.shape));
    const std::size_t n = av.shape[av.rank() - 2];
    const std::size_t m = av.shape.back();
    const std::size_t batch = av.size() / (n * m);
    Shape s = av.shape;
    std::swap(s[s.size() - 2], s[s.size() - 1]);
    NDArray out(s);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* src = av.data.data() + b * n * m;
        double* dst = out.data.data() + b * n * m;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                dst[j * n + i] = src[i * m + j];
            }
        }
    }
    const std::size_t ia = a.id();
    return a.tape().record("transpose", std::move(out), {a}, [=](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& da = t.grad_slot(ia);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = g.data.data() + b * n * m;
            double* dst = da.data.data() + b * n * m;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    dst[i * m + j] += src[j * n + i];
                }
            }
        }
    });
}

Var reshape(const Var& a, Shape shape) {
    const NDArray& av = a.value();
    require(shape_size(shape) == av.size(),
            "reshape from " + shape_str(av.shape) + " to " + shape_str(shape) + " changes element count");
    NDArray out(std::move(shape), av.data);
    const std::size_t ia = a.id();
    return a.tape().record("reshape", std::move(out), {a}, [ia](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& da = t.grad_slot(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da.data[i] += g.data[i];
        }
    });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const NDArray& av = a.value();
    require(axis < av.rank() && begin < end && end <= av.shape[axis],
            "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " + std::to_string(axis) +
                " invalid for shape " + shape_str(av.shape));
    const std::size_t outer = product(av.shape, 0, axis);
    const std::size_t len = av.shape[axis];
    const std::size_t inner = product(av.shape, axis + 1, av.rank());
    const std::size_t width = (end - begin) * inner;
    Shape s = av.shape;
    s[axis] = end - begin;
    NDArray out(s);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = av.data.data() + (o * len + begin) * inner;
        std::copy(src, src + width, out.data.data() + o * width);
    }
    const std::size_t ia = a.id();
    return a.tape().record("slice", std::move(out), {a}, [=](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& da = t.grad_slot(ia);
        for (std::size_t o = 0; o < outer; ++o) {
            double* dst = da.data.data() + (o * len + begin) * inner;
            const double* src = g.data.data() + o * width;
            for (std::size_t i = 0; i < width; ++i) {
                dst[i] += src[i];
            }
        }
    });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    require(!parts.empty(), "concat of zero tensors");
    const Shape& first = parts[0].value().shape;
    require(axis < first.size(), "concat axis " + std::to_string(axis) + " out of range for " + shape_str(first));
    std::vector<std::size_t> lens;
    std::size_t total = 0;
    for (const Var& p : parts) {
        const Shape& s = p.value().shape;
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) {
            ok = d == axis || s[d] == first[d];
        }
        require(ok, "concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
        lens.push_back(s[axis]);
        total += s[axis];
    }
    const std::size_t outer = product(first, 0, axis);
    const std::size_t inner = product(first, axis + 1, first.size());
    Shape s = first;
    s[axis] = total;
    NDArray out(s);
    std::size_t offset = 0;
    std::vector<std::size_t> ids;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const NDArray& pv = parts[pi].value();
        const std::size_t w = lens[pi] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            const double* src = pv.data.data() + o * w;
            std::copy(src, src + w, out.data.data() + (o * total + offset) * inner);
        }
        offset += lens[pi];
        ids.push_back(parts[pi].id());
    }
    return parts[0].tape().record(
        "concat", std::move(out), parts, [ids, lens, outer, inner, total](Tape& t, const NDArray&, const NDArray& g) {
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                const std::size_t w = lens[pi] * inner;
                if (t.requires_grad(ids[pi])) {
                    NDArray& dp = t.grad_slot(ids[pi]);
                    for (std::size_t o = 0; o < outer; ++o) {
                        const double* src = g.data.data() + (o * total + off) * inner;
                        double* dst = dp.data.data() + o * w;
                        for (std::size_t i = 0; i < w; ++i) {
                            dst[i] += src[i];
                        }
                    }
                }
                off += lens[pi];
            }
        });
}

Var softmax(const Var& x, std::size_t axis) {
    const NDArray& xv = x.value();
    require(axis < xv.rank(), "softmax axis " + std::to_string(axis) + " out of range for " + shape_str(xv.shape));
    const std::size_t outer = product(xv.shape, 0, axis);
    const std::size_t len = xv.shape[axis];
    const std::size_t inner = product(xv.shape, axis + 1, xv.rank());
    NDArray out(xv.shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            double mx = xv.data[base];
            for (std::size_t j = 1; j < len; ++j) {
                mx = std::max(mx, xv.data[base + j * inner]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(xv.data[base + j * inner] - mx);
                out.data[base + j * inner] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < len; ++j) {
                out.data[base + j * inner] /= sum;
            }
        }
    }
    const std::size_t ix = x.id();
    return x.tape().record("softmax", std::move(out), {x}, [=](Tape& t, const NDArray& y, const NDArray& g) {
        NDArray& dx = t.grad_slot(ix);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * len * inner + i;
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) {
                    dot += g.data[base + j * inner] * y.data[base + j * inner];
                }
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t k = base + j * inner;
                    dx.data[k] += y.data[k] * (g.data[k] - dot);
                }
            }
        }
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const NDArray& xv = x.value();
    require(xv.rank() >= 1, "layer_norm on a scalar");
    const std::size_t n = xv.shape.back();
    require(gain.value().shape == Shape{n} && bias.value().shape == Shape{n},
            "layer_norm gain/bias " + shape_str(gain.value().shape) + "/" + shape_str(bias.value().shape) +
                " do not match last axis of " + shape_str(xv.shape));
    if (!(eps > 0.0)) {
        throw ConfigError("layer_norm eps must be positive");
    }
    const std::size_t rows = xv.size() / n;
    const NDArray& gv = gain.value();
    const NDArray& bv = bias.value();
    NDArray out(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data.data() + r * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mean += xr[j];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        double* yr = out.data.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = (xr[j] - mean) * inv * gv.data[j] + bv.data[j];
        }
    }
    const std::size_t ix = x.id();
    const std::size_t ig = gain.id();
    const std::size_t ib = bias.id();
    return x.tape().record("layer_norm", std::move(out), {x, gain, bias},
                           [=](Tape& t, const NDArray&, const NDArray& g) {
                               const NDArray& xv = t.value(ix);
                               const NDArray& gv = t.value(ig);
                               const bool want_x = t.requires_grad(ix);
                               const bool want_g = t.requires_grad(ig);
                               const bool want_b = t.requires_grad(ib);
                               std::vector<double> xhat(n);
                               std::vector<double> dxhat(n);
                               for (std::size_t r = 0; r < rows; ++r) {
                                   const double* xr = xv.data.data() + r * n;
                                   const double* gr = g.data.data() + r * n;
                                   double mean = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       mean += xr[j];
                                   }
                                   mean /= static_cast<double>(n);
                                   double var = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double d = xr[j] - mean;
                                       var += d * d;
                                   }
                                   var /= static_cast<double>(n);
                                   const double inv = 1.0 / std::sqrt(var + eps);
                                   double mean_dxhat = 0.0;
                                   double mean_dxhat_xhat = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       xhat[j] = (xr[j] - mean) * inv;
                                       dxhat[j] = gr[j] * gv.data[j];
                                       mean_dxhat += dxhat[j];
                                       mean_dxhat_xhat += dxhat[j] * xhat[j];
                                   }
                                   mean_dxhat /= static_cast<double>(n);
                                   mean_dxhat_xhat /= static_cast<double>(n);
                                   if (want_x) {
                                       double* dxr = t.grad_slot(ix).data.data() + r * n;
                                       for (std::size_t j = 0; j < n; ++j) {
                                           dxr[j] += inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                                       }
                                   }
                                   if (want_g) {
                                       NDArray& dg = t.grad_slot(ig);
                                       for (std::size_t j = 0; j < n; ++j) {
                                           dg.data[j] += gr[j] * xhat[j];
                                       }
                                   }
                                   if (want_b) {
                                       NDArray& db = t.grad_slot(ib);
                                       for (std::size_t j = 0; j < n; ++j) {
                                           db.data[j] += gr[j];
                                       }
                                   }
                               }
                           });
}

Var gelu(const Var& x) {
    const NDArray& xv = x.value();
    NDArray out(xv.shape);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv.data[i];
        out.data[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
    }
    const std::size_t ix = x.id();
    return x.tape().record("gelu", std::move(out), {x}, [ix](Tape& t, const NDArray&, const NDArray& g) {
        const NDArray& xv = t.value(ix);
        NDArray& dx = t.grad_slot(ix);
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double v = xv.data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            dx.data[i] += g.data[i] * (cdf + v * pdf);
        }
    });
}

Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
    const NDArray& tv = table.value();
    require(tv.rank() == 2, "gather_rows needs a rank-2 table, got " + shape_str(tv.shape));
    require(!ids.empty(), "gather_rows with no ids");
    const std::size_t rows = tv.shape[0];
    const std::size_t d = tv.shape[1];
    std::vector<std::size_t> idv(ids.begin(), ids.end());
    for (std::size_t id : idv) {
        if (id >= rows) {
            throw CategoryError("variable category id " + std::to_string(id) + " out of range for table of " +
                                std::to_string(rows) + " categories");
        }
    }
    NDArray out(Shape{idv.size(), d});
    for (std::size_t c = 0; c < idv.size(); ++c) {
        std::copy_n(tv.data.data() + idv[c] * d, d, out.data.data() + c * d);
    }
    const std::size_t it = table.id();
    return table.tape().record("gather_rows", std::move(out), {table},
                               [it, idv, d](Tape& t, const NDArray&, const NDArray& g) {
                                   NDArray& dt = t.grad_slot(it);
                                   for (std::size_t c = 0; c < idv.size(); ++c) {
                                       for (std::size_t j = 0; j < d; ++j) {
                                           dt.data[idv[c] * d + j] += g.data[c * d + j];
                                       }
                                   }
                               });
}

Var repeat_interleave(const Var& x, std::size_t times) {
    const NDArray& xv = x.value();
    require(xv.rank() >= 1 && times >= 1, "repeat_interleave needs rank >= 1 and times >= 1");
    const std::size_t batch = xv.shape[0];
    const std::size_t inner = xv.size() / batch;
    Shape s = xv.shape;
    s[0] = batch * times;
    NDArray out(s);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < times; ++r) {
            std::copy_n(xv.data.data() + b * inner, inner, out.data.data() + (b * times + r) * inner);
        }
    }
    const std::size_t ix = x.id();
    return x.tape().record("repeat_interleave", std::move(out), {x}, [=](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& dx = t.grad_slot(ix);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t r = 0; r < times; ++r) {
                const double* src = g.data.data() + (b * times + r) * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    dx.data[b * inner + i] += src[i];
                }
            }
        }
    });
}

Var expand_leading(const Var& x, std::size_t count) {
    const NDArray& xv = x.value();
    require(count >= 1, "expand_leading count must be >= 1");
    Shape s{count};
    s.insert(s.end(), xv.shape.begin(), xv.shape.end());
    NDArray out(s);
    const std::size_t inner = xv.size();
    for (std::size_t c = 0; c < count; ++c) {
        std::copy_n(xv.data.data(), inner, out.data.data() + c * inner);
    }
    const std::size_t ix = x.id();
    return x.tape().record("expand_leading", std::move(out), {x}, [=](Tape& t, const NDArray&, const NDArray& g) {
        NDArray& dx = t.grad_slot(ix);
        for (std::size_t c = 0; c < count; ++c) {
            for (std::size_t i = 0; i < inner; ++i) {
                dx.data[i] += g.data[c * inner + i];
            }
        }
    });
}

Var mse(const Var& pred, const Var& target) {
    const NDArray& pv = pred.value();
    const NDArray& tv = target.value();
    require(pv.shape == tv.shape, "mse shape mismatch: " + shape_str(pv.shape) + " vs " + shape_str(tv.shape));
    double sum = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv.data[i] - tv.data[i];
        sum += d * d;
    }
    const double count = static_cast<double>(pv.size());
    const std::size_t ip = pred.id();
    const std::size_t it = target.id();
    return pred.tape().record("mse", NDArray::scalar(sum / count), {pred, target},
                              [ip, it, count](Tape& t, const NDArray&, const NDArray& g) {
                                  const NDArray& pv = t.value(ip);
                                  const NDArray& tv = t.value(it);
                                  const double c = 2.0 * g.data[0] / count;
                                  const bool want_p = t.requires_grad(ip);
                                  const bool want_t = t.requires_grad(it);
                                  for (std::size_t i = 0; i < pv.size(); ++i) {
                                      const double d = c * (pv.data[i] - tv.data[i]);
                                      if (want_p) {
                                          t.grad_slot(ip).data[i] += d;
                                      }
                                      if (want_t) {
                                          t.grad_slot(it).data[i] -= d;
                                      }
                                  }
                              });
}

}  // namespace pixtime::ops
