// nn.cpp

#include "uct/nn.hpp"

#include <cmath>

namespace uct::nn {

ad::Var ParamStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw InvalidArgument("ParamStore: duplicate parameter " + name);
    ad::Var v = ad::leaf(std::move(init), name);
    index_[name] = entries_.size();
    entries_.push_back({name, v});
    return v;
}

ad::Var ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("ParamStore: unknown parameter " + name);
    return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

long ParamStore::total_count() const {
    long n = 0;
    for (const auto& [name, v] : entries_) n += v->value.numel();
    return n;
}

void ParamStore::set_trainable(bool trainable) {
    for (auto& [name, v] : entries_) {
        v->trainable = trainable;
        v->needs_grad = trainable;
    }
}

std::vector<double> ParamStore::flat_values() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total_count()));
    for (const auto& [name, v] : entries_)
        out.insert(out.end(), v->value.data.begin(), v->value.data.end());
    return out;
}

void ParamStore::load_flat_values(const std::vector<double>& vals) {
    std::size_t off = 0;
    for (auto& [name, v] : entries_) {
        if (off + v->value.data.size() > vals.size())
            throw InvalidArgument("ParamStore: flat value vector too short");
        std::copy_n(vals.begin() + static_cast<long>(off), v->value.data.size(),
                    v->value.data.begin());
        off += v->value.data.size();
    }
    if (off != vals.size()) throw InvalidArgument("ParamStore: flat value vector size mismatch");
}

Adam::Adam(ParamStore* params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& [name, v] : params->entries()) {
        m_.push_back(Tensor(v->value.shape));
        v_.push_back(Tensor(v->value.shape));
    }
}

void Adam::step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (auto& [name, p] : params_->entries()) {
        if (p->grad.shape != p->value.shape) {
            ++k;
            continue;  // parameter untouched by this backward pass
        }
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (long i = 0; i < p->value.numel(); ++i) {
            double g = p->grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        ++k;
    }
}

void Adam::zero_grad() {
    for (auto& [name, p] : params_->entries())
        if (p->grad.shape == p->value.shape)
            std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

Tensor init_conv_weight(int cout, int cin, int k, Rng& rng) {
    Tensor w({cout, cin, k, k});
    double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (auto& v : w.data) v = normal(rng, 0.0, std);
    return w;
}

Tensor init_linear_weight(int out, int in, Rng& rng) {
    Tensor w({out, in});
    double std = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& v : w.data) v = normal(rng, 0.0, std);
    return w;
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride_,
               int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    w = ps.add(name + ".w", init_conv_weight(cout, cin, k, rng));
    b = ps.add(name + ".b", Tensor({cout}));
}

}  // namespace uct::nn
