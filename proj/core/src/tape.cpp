#include "mfusion/tape.hpp"

#include <cmath>
#include <string>

#include <memory>

#include "mfusion/errors.hpp"

namespace mfusion::num {

Value Tape::next() const { return Value{static_cast<std::uint32_t>(nodes_.size())}; }

Value Tape::push(Tensor val, std::function<void()> back) {
    nodes_.push_back(Node{std::move(val), Tensor{}, std::move(back)});
    return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor v) { return push(std::move(v)); }

Value Tape::linear(Value x, Value w, Value b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (bv.rank() != 1 || bv.size() != wv.rows()) {
        throw ShapeError("linear: bias " + bv.shape_str() + " vs weight " + wv.shape_str());
    }
    Tensor y = matvec(wv, xv);
    y += bv;
    const Value out = next();
    push(std::move(y), [this, x, w, b, out]() {
        const Tensor& g = grad(out);
        add_outer(grad_ref(w), g, val(x));
        grad_ref(b) += g;
        add_matvec_t(grad_ref(x), val(w), g);
    });
    return out;
}

Value Tape::linear_rows(Value x, Value w, Value b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.cols()) {
        throw ShapeError("linear_rows: input " + xv.shape_str() + " vs weight " + wv.shape_str());
    }
    if (bv.rank() != 1 || bv.size() != wv.rows()) {
        throw ShapeError("linear_rows: bias " + bv.shape_str() + " vs weight " + wv.shape_str());
    }
    Tensor y = num::matmul_nt(xv, wv);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) y.at(i, j) += bv[j];
    }
    const Value out = next();
    push(std::move(y), [this, x, w, b, out]() {
        const Tensor& g = grad(out);
        add_matmul(grad_ref(x), g, val(w));      // dX += G W
        add_matmul_tn(grad_ref(w), g, val(x));   // dW += G^T X
        Tensor& gb = grad_ref(b);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
        }
    });
    return out;
}

Value Tape::matmul(Value a, Value b) {
    Tensor y = num::matmul(val(a), val(b));
    const Value out = next();
    push(std::move(y), [this, a, b, out]() {
        const Tensor& g = grad(out);
        add_matmul_nt(grad_ref(a), g, val(b));  // dA += G B^T
        add_matmul_tn(grad_ref(b), val(a), g);  // dB += A^T G
    });
    return out;
}

Value Tape::matmul_nt(Value a, Value b) {
    Tensor y = num::matmul_nt(val(a), val(b));
    const Value out = next();
    push(std::move(y), [this, a, b, out]() {
        const Tensor& g = grad(out);
        add_matmul(grad_ref(a), g, val(b));     // dA += G B
        add_matmul_tn(grad_ref(b), g, val(a));  // dB += G^T A
    });
    return out;
}

Value Tape::add(Value a, Value b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("add: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor y = av;
    y += bv;
    const Value out = next();
    push(std::move(y), [this, a, b, out]() {
        const Tensor& g = grad(out);
        grad_ref(a) += g;
        grad_ref(b) += g;
    });
    return out;
}

Value Tape::mul(Value a, Value b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("mul: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor y = av;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    const Value out = next();
    push(std::move(y), [this, a, b, out]() {
        const Tensor& g = grad(out);
        Tensor& ga = grad_ref(a);
        Tensor& gb = grad_ref(b);
        const Tensor& av2 = val(a);
        const Tensor& bv2 = val(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av2[i];
        }
    });
    return out;
}

Value Tape::scale(Value a, double s) {
    Tensor y = val(a);
    y *= s;
    const Value out = next();
    push(std::move(y), [this, a, s, out]() {
        const Tensor& g = grad(out);
        Tensor& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
    return out;
}

Value Tape::relu(Value x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0) y[i] = 0.0;
    }
    const Value out = next();
    push(std::move(y), [this, x, out]() {
        const Tensor& g = grad(out);
        const Tensor& xv = val(x);
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) gx[i] += g[i];
        }
    });
    return out;
}

Value Tape::sigmoid(Value x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y[i];
        y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    const Value out = next();
    push(std::move(y), [this, x, out]() {
        const Tensor& g = grad(out);
        const Tensor& yv = val(out);
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
    });
    return out;
}

Value Tape::tanh_(Value x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    const Value out = next();
    push(std::move(y), [this, x, out]() {
        const Tensor& g = grad(out);
        const Tensor& yv = val(out);
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
    return out;
}

Value Tape::softmax(Value x) {
    Tensor y = val(x);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = y.raw() + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
    const Value out = next();
    push(std::move(y), [this, x, out]() {
        const Tensor& g = grad(out);
        const Tensor& yv = val(out);
        Tensor& gx = grad_ref(x);
        const std::size_t r = yv.rows(), c = yv.cols();
        for (std::size_t i = 0; i < r; ++i) {
            const double* grow = g.raw() + i * c;
            const double* yrow = yv.raw() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += grow[j] * yrow[j];
            double* gxrow = gx.raw() + i * c;
            for (std::size_t j = 0; j < c; ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
        }
    });
    return out;
}

Value Tape::l1_normalize(Value x) {
    const Tensor& xv = val(x);
    if (xv.rank() != 1) throw ShapeError("l1_normalize expects a vector, got " + xv.shape_str());
    double sum = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) sum += xv[i];
    if (!(sum > 0.0)) throw NumericError("l1_normalize: sum must be positive, got " + std::to_string(sum));
    Tensor y = xv;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= sum;
    const Value out = next();
    push(std::move(y), [this, x, sum, out]() {
        const Tensor& g = grad(out);
        const Tensor& yv = val(out);
        Tensor& gx = grad_ref(x);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * yv[i];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (g[i] - dot) / sum;
    });
    return out;
}

Value Tape::concat_vecs(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat_vecs: no parts");
    std::size_t total = 0;
    for (Value p : parts) {
        if (val(p).rank() != 1) {
            throw ShapeError("concat_vecs expects vectors, got " + val(p).shape_str());
        }
        total += val(p).size();
    }
    Tensor y({total});
    std::size_t off = 0;
    for (Value p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t i = 0; i < pv.size(); ++i) y[off + i] = pv[i];
        off += pv.size();
    }
    const Value out = next();
    push(std::move(y), [this, parts, out]() {
        const Tensor& g = grad(out);
        std::size_t o = 0;
        for (Value p : parts) {
            Tensor& gp = grad_ref(p);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[o + i];
            o += gp.size();
        }
    });
    return out;
}

Value Tape::concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t rows = val(parts[0]).rows();
    std::size_t total_cols = 0;
    for (Value p : parts) {
        const Tensor& pv = val(p);
        if (pv.rank() != 2 || pv.rows() != rows) {
            throw ShapeError("concat_cols: " + val(parts[0]).shape_str() + " vs " + pv.shape_str());
        }
        total_cols += pv.cols();
    }
    Tensor y({rows, total_cols});
    std::size_t coff = 0;
    for (Value p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < pv.cols(); ++j) y.at(i, coff + j) = pv.at(i, j);
        }
        coff += pv.cols();
    }
    const Value out = next();
    push(std::move(y), [this, parts, rows, out]() {
        const Tensor& g = grad(out);
        std::size_t co = 0;
        for (Value p : parts) {
            Tensor& gp = grad_ref(p);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < gp.cols(); ++j) gp.at(i, j) += g.at(i, co + j);
            }
            co += gp.cols();
        }
    });
    return out;
}

Value Tape::slice_cols(Value x, std::size_t c0, std::size_t c1) {
    const Tensor& xv = val(x);
    if (xv.rank() != 2 || c0 >= c1 || c1 > xv.cols()) {
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") out of range for " + xv.shape_str());
    }
    const std::size_t rows = xv.rows(), cols = c1 - c0;
    Tensor y({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) y.at(i, j) = xv.at(i, c0 + j);
    }
    const Value out = next();
    push(std::move(y), [this, x, c0, out]() {
        const Tensor& g = grad(out);
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) gx.at(i, c0 + j) += g.at(i, j);
        }
    });
    return out;
}

Value Tape::reshape(Value x, std::vector<std::size_t> shape) {
    const Tensor& xv = val(x);
    Tensor y(std::move(shape), std::vector<double>(xv.data().begin(), xv.data().end()));
    if (y.size() != xv.size()) {
        throw ShapeError("reshape: " + xv.shape_str() + " vs " + y.shape_str());
    }
    const Value out = next();
    push(std::move(y), [this, x, out]() {
        const Tensor& g = grad(out);
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
    return out;
}

Value Tape::dot(Value x, Tensor weights) {
    const Tensor& xv = val(x);
    if (xv.size() != weights.size()) {
        throw ShapeError("dot: " + xv.shape_str() + " vs " + weights.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * weights[i];
    const Value out = next();
    auto w = std::make_shared<Tensor>(std::move(weights));
    push(Tensor::scalar(acc), [this, x, w, out]() {
        const double g = grad(out)[0];
        Tensor& gx = grad_ref(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*w)[i];
    });
    return out;
}

Value Tape::cross_entropy(Value probs, std::size_t label) {
    const Tensor& pv = val(probs);
    if (pv.rank() != 1 || label >= pv.size()) {
        throw ShapeError("cross_entropy: label " + std::to_string(label) + " vs probs " +
                         pv.shape_str());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] < 0.0) {
            throw NumericError("cross_entropy: negative probability " + std::to_string(pv[i]));
        }
        sum += pv[i];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw NumericError("cross_entropy: probabilities sum to " + std::to_string(sum) +
                           ", expected 1");
    }
    const double clamped = std::max(pv[label], 1e-12);
    const Value out = next();
    push(Tensor::scalar(-std::log(clamped)), [this, probs, label, clamped, out]() {
        const double g = grad(out)[0];
        grad_ref(probs)[label] += -g / clamped;
    });
    return out;
}

Value Tape::layer_norm_rows(Value x, Value gamma, Value beta) {
    const Tensor& xv = val(x);
    const Tensor& gv = val(gamma);
    const Tensor& bv = val(beta);
    const std::size_t cols = xv.cols();
    if (gv.rank() != 1 || gv.size() != cols || bv.rank() != 1 || bv.size() != cols) {
        throw ShapeError("layer_norm: input " + xv.shape_str() + " vs scale " + gv.shape_str());
    }
    constexpr double kEps = 1e-5;
    const std::size_t rows = xv.rows();
    Tensor y(xv.shape());
    // cache normalized activations and per-row inverse stddev for backward
    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = xv.raw() + i * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += row[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + kEps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < cols; ++j) {
            const double xh = (row[j] - mean) * is;
            xhat->at(i, j) = xh;
            y.at(i, j) = gv[j] * xh + bv[j];
        }
    }
    const Value out = next();
    push(std::move(y), [this, x, gamma, beta, xhat, inv_std, rows, cols, out]() {
        const Tensor& g = grad(out);
        Tensor& gx = grad_ref(x);
        Tensor& gg = grad_ref(gamma);
        Tensor& gb = grad_ref(beta);
        const Tensor& gammav = val(gamma);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* grow = g.raw() + i * cols;
            const double* xhrow = xhat->raw() + i * cols;
            double mean_gs = 0.0, mean_gs_xh = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double gs = grow[j] * gammav[j];
                mean_gs += gs;
                mean_gs_xh += gs * xhrow[j];
                gg[j] += grow[j] * xhrow[j];
                gb[j] += grow[j];
            }
            mean_gs /= static_cast<double>(cols);
            mean_gs_xh /= static_cast<double>(cols);
            const double is = (*inv_std)[i];
            double* gxrow = gx.raw() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) {
                const double gs = grow[j] * gammav[j];
                gxrow[j] += is * (gs - mean_gs - xhrow[j] * mean_gs_xh);
            }
        }
    });
    return out;
}

std::pair<Value, Value> Tape::lstm_cell(Value x, Value h, Value c, const LstmCellParams& p) {
    const std::size_t n_h = val(h).size();
    const Tensor& w = val(p.w_in);
    if (w.rank() != 2 || w.rows() != n_h || w.cols() != val(x).size() + n_h ||
        val(c).size() != n_h) {
        throw ShapeError("lstm_cell: weight " + w.shape_str() + " vs input " + val(x).shape_str() +
                         " and state " + val(h).shape_str());
    }
    Value z = concat_vecs({x, h});
    Value gate_in = sigmoid(linear(z, p.w_in, p.b_in));
    Value gate_forget = sigmoid(linear(z, p.w_forget, p.b_forget));
    Value gate_cell = tanh_(linear(z, p.w_cell, p.b_cell));
    Value gate_out = sigmoid(linear(z, p.w_out, p.b_out));
    Value c_next = add(mul(gate_forget, c), mul(gate_in, gate_cell));
    Value h_next = mul(gate_out, tanh_(c_next));
    return {h_next, c_next};
}

AttentionResult Tape::self_attention(Value x, const AttentionParams& p, std::size_t n_heads) {
    const Tensor& xv = val(x);
    if (xv.rank() != 2) throw ShapeError("self_attention expects (T x d), got " + xv.shape_str());
    const std::size_t d = xv.cols();
    if (n_heads == 0 || d % n_heads != 0) {
        throw ShapeError("self_attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
    }
    const std::size_t dh = d / n_heads;
    Value q = linear_rows(x, p.w_query, p.b_query);
    Value k = linear_rows(x, p.w_key, p.b_key);
    Value v = linear_rows(x, p.w_value, p.b_value);
    std::vector<Value> outs;
    std::vector<Value> weights;
    for (std::size_t head = 0; head < n_heads; ++head) {
        const std::size_t c0 = head * dh, c1 = c0 + dh;
        Value qh = slice_cols(q, c0, c1);
        Value kh = slice_cols(k, c0, c1);
        Value vh = slice_cols(v, c0, c1);
        Value scores = scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        Value attn = softmax(scores);
        weights.push_back(attn);
        outs.push_back(matmul(attn, vh));
    }
    Value merged = outs.size() == 1 ? outs[0] : concat_cols(outs);
    Value projected = linear_rows(merged, p.w_out, p.b_out);
    return AttentionResult{projected, std::move(weights)};
}

void Tape::backward(Value root, double seed) {
    if (val(root).size() != 1) {
        throw ShapeError("backward root must be scalar, got " + val(root).shape_str());
    }
    for (std::uint32_t i = 0; i <= root.id; ++i) {
        nodes_[i].grad = Tensor(nodes_[i].val.shape());
    }
    nodes_[root.id].grad[0] = seed;
    for (std::uint32_t i = root.id + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back();
    }
}

}  // namespace mfusion::num
