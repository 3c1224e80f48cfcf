#include "ctnorm/models.hpp"

#include <algorithm>
#include <cmath>

#include "ctnorm/error.hpp"
#include "ctnorm/ops.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm::gan {

void GeneratorConfig::validate() const
{
    if (n_resblocks < 1)
        throw ConfigError("generator needs at least one residual block");
    if (channels < 2)
        throw ConfigError("generator channels must be >= 2");
}

void DiscriminatorConfig::validate() const
{
    if (n_stages < 1)
        throw ConfigError("discriminator needs at least one downsample stage");
    if (base_channels < 1)
        throw ConfigError("discriminator base channels must be >= 1");
}

namespace {

void add_into(Tensor& dst, const Tensor& a, const Tensor& b)
{
    dst.resize_like(a);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(a.data.size()); ++i)
        dst.data[size_t(i)] = a.data[size_t(i)] + b.data[size_t(i)];
}

} // namespace

Conv3dLayer::Conv3dLayer(const std::string& name, int cout, int cin, int k, int stride_,
                         int pad_, bool spectral_, uint64_t seed)
    : stride(stride_), pad(pad_), spectral(spectral_)
{
    w = nn::Parameter(name + ".w", nn::he_conv_init(cout, cin, k, k, k, seed), 5, spectral_,
                      hash_combine(seed, 0x7533ull));
    Tensor bias(cout, 1, 1, 1, 1);
    b = nn::Parameter(name + ".b", std::move(bias), 1, false, 0);
}

const Tensor& Conv3dLayer::forward(const Tensor& x, int power_iters)
{
    in = &x;
    if (spectral) {
        weff = nn::spectral_normalize(w, power_iters, &sigma);
        nn::conv3d_forward(x, weff, b.value.data, stride, pad, out);
    } else {
        nn::conv3d_forward(x, w.value, b.value.data, stride, pad, out);
    }
    return out;
}

const Tensor& Conv3dLayer::backward(const Tensor& dy, bool input_grad)
{
    const Tensor& wt = spectral ? weff : w.value;
    Tensor dw;
    dw.resize_like(w.value);
    std::vector<float> db(b.value.data.size(), 0.0f);
    nn::conv3d_backward_weight(*in, dy, stride, pad, dw, db);
    // spectral layers chain through W/sigma with sigma held constant
    const float inv = spectral ? float(1.0 / sigma) : 1.0f;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(dw.data.size()); ++i)
        w.grad.data[size_t(i)] += dw.data[size_t(i)] * inv;
    for (size_t i = 0; i < db.size(); ++i)
        b.grad.data[i] += db[i];
    if (input_grad)
        nn::conv3d_backward_input(dy, wt, stride, pad, in->shape, din);
    return din;
}

void Conv3dLayer::collect(std::vector<nn::Parameter*>& out_params)
{
    out_params.push_back(&w);
    out_params.push_back(&b);
}

// ---- Generator -----------------------------------------------------------

Generator::Generator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg)
{
    cfg.validate();
    const int C = cfg.channels;
    uint64_t k = 0;
    head_ = Conv3dLayer("g.head", C, 1, 3, 1, 1, false, hash_combine(seed, ++k));
    blocks_.resize(size_t(cfg.n_resblocks));
    for (int i = 0; i < cfg.n_resblocks; ++i) {
        auto& blk = blocks_[size_t(i)];
        const std::string base = "g.block" + std::to_string(i);
        blk.conv1 = Conv3dLayer(base + ".conv1", C, C, 3, 1, 1, false, hash_combine(seed, ++k));
        blk.conv2 = Conv3dLayer(base + ".conv2", C, C, 3, 1, 1, false, hash_combine(seed, ++k));
    }
    tail_ = Conv3dLayer("g.tail", 2 * C, C, 3, 1, 1, false, hash_combine(seed, ++k));
    out_conv_ = Conv3dLayer("g.out", 1, C, 3, 1, 1, false, hash_combine(seed, ++k));
}

const Tensor& Generator::forward(const Tensor& x)
{
    if (x.shape[1] != 1)
        throw ShapeError("generator expects a single input channel");
    const Tensor* h = &head_.forward(x, 0);
    const Tensor& h0 = head_.out;
    for (auto& blk : blocks_) {
        const Tensor& c1 = blk.conv1.forward(*h, 0);
        nn::leaky_relu_forward(c1, 0.0f, blk.relu_out);
        const Tensor& c2 = blk.conv2.forward(blk.relu_out, 0);
        add_into(blk.sum_out, *h, c2);
        h = &blk.sum_out;
    }
    add_into(body_out_, *h, h0); // EDSR global feature skip
    const Tensor& t = tail_.forward(body_out_, 0);
    nn::z_upshuffle_forward(t, up_out_);
    return out_conv_.forward(up_out_, 0);
}

void Generator::backward(const Tensor& dy)
{
    const Tensor& dup = out_conv_.backward(dy, true);
    nn::z_upshuffle_backward(dup, dbuf_a_);
    const Tensor& dbody = tail_.backward(dbuf_a_, true);

    // dbody feeds both the block chain and the global skip to the head
    Tensor* dh = &dbuf_b_;
    dh->resize_like(dbody);
    std::copy(dbody.data.begin(), dbody.data.end(), dh->data.begin());
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        auto& blk = *it;
        const Tensor& dr = blk.conv2.backward(*dh, true);
        nn::leaky_relu_backward(blk.conv1.out, dr, 0.0f, blk.dsum);
        const Tensor& dc1 = blk.conv1.backward(blk.dsum, true);
        add_into(*dh, *dh, dc1); // residual skip
    }
    add_into(*dh, *dh, dbody); // global skip
    head_.backward(*dh, false);
}

std::vector<nn::Parameter*> Generator::params()
{
    std::vector<nn::Parameter*> ps;
    head_.collect(ps);
    for (auto& blk : blocks_) {
        blk.conv1.collect(ps);
        blk.conv2.collect(ps);
    }
    tail_.collect(ps);
    out_conv_.collect(ps);
    return ps;
}

// ---- Discriminator -------------------------------------------------------

Discriminator::Discriminator(const DiscriminatorConfig& cfg, uint64_t seed) : cfg_(cfg)
{
    cfg.validate();
    uint64_t k = 100;
    int cin = 1;
    for (int i = 0; i < cfg.n_stages; ++i) {
        const int cout = std::min(cfg.base_channels << i, 256);
        convs_.emplace_back("d.conv" + std::to_string(i), cout, cin, 3, 2, 1, true,
                            hash_combine(seed, ++k));
        cin = cout;
    }
    acts_.resize(convs_.size());
    dacts_.resize(convs_.size());
    ++k;
    fc_w_ = nn::Parameter("d.fc.w", nn::he_linear_init(1, cin, hash_combine(seed, k)), 2, true,
                          hash_combine(seed, 0x75ull + k));
    Tensor fb(1, 1, 1, 1, 1);
    fc_b_ = nn::Parameter("d.fc.b", std::move(fb), 1, false, 0);
}

const Tensor& Discriminator::forward(const Tensor& x, int power_iters)
{
    const Tensor* h = &x;
    for (size_t i = 0; i < convs_.size(); ++i) {
        const Tensor& c = convs_[i].forward(*h, power_iters);
        nn::leaky_relu_forward(c, 0.2f, acts_[i]);
        h = &acts_[i];
    }
    nn::global_avg_pool_forward(*h, gap_out_);
    fc_weff_ = nn::spectral_normalize(fc_w_, power_iters, &fc_sigma_);
    nn::linear_forward(gap_out_, fc_weff_, fc_b_.value.data, scores_);
    return scores_;
}

const Tensor& Discriminator::backward(const Tensor& dscores, bool input_grad)
{
    {
        Tensor dw;
        dw.resize_like(fc_w_.value);
        std::vector<float> db(1, 0.0f);
        nn::linear_backward_weight(gap_out_, dscores, dw, db);
        const float inv = float(1.0 / fc_sigma_);
        for (size_t i = 0; i < dw.data.size(); ++i)
            fc_w_.grad.data[i] += dw.data[i] * inv;
        fc_b_.grad.data[0] += db[0];
    }
    nn::linear_backward_input(dscores, fc_weff_, dfc_in_);
    nn::global_avg_pool_backward(dfc_in_, acts_.back().shape, dgap_);

    const Tensor* dh = &dgap_;
    for (size_t i = convs_.size(); i-- > 0;) {
        nn::leaky_relu_backward(convs_[i].out, *dh, 0.2f, dacts_[i]);
        const bool need_input = input_grad || i > 0;
        dh = &convs_[i].backward(dacts_[i], need_input);
    }
    return *dh;
}

std::vector<nn::Parameter*> Discriminator::params()
{
    std::vector<nn::Parameter*> ps;
    for (auto& c : convs_)
        c.collect(ps);
    ps.push_back(&fc_w_);
    ps.push_back(&fc_b_);
    return ps;
}

std::vector<nn::Parameter*> Discriminator::spectral_params()
{
    std::vector<nn::Parameter*> ps;
    for (auto& c : convs_)
        ps.push_back(&c.w);
    ps.push_back(&fc_w_);
    return ps;
}

// ---- serialization -------------------------------------------------------

std::vector<nn::NamedTensor> parameter_state(const std::vector<const nn::Parameter*>& ps,
                                             const std::string& prefix)
{
    std::vector<nn::NamedTensor> ts;
    for (const nn::Parameter* p : ps) {
        nn::NamedTensor t;
        t.name = prefix + p->name;
        if (p->rank == 1) {
            t.dims = {uint32_t(p->value.shape[0])};
        } else if (p->rank == 2) {
            t.dims = {uint32_t(p->value.shape[0]), uint32_t(p->value.shape[1])};
        } else {
            t.dims.assign(p->value.shape.begin(), p->value.shape.end());
        }
        t.data = p->value.data;
        ts.push_back(t);
        nn::NamedTensor m = ts.back();
        m.name += ".m";
        m.data = p->m.data;
        ts.push_back(std::move(m));
        nn::NamedTensor v = ts[ts.size() - 2];
        v.name += ".v";
        v.data = p->v.data;
        ts.push_back(std::move(v));
        if (p->spectral) {
            nn::NamedTensor u;
            u.name = prefix + p->name + ".u";
            u.dims = {uint32_t(p->u.size())};
            u.data = p->u;
            ts.push_back(std::move(u));
        }
    }
    return ts;
}

void load_parameter_state(std::vector<nn::Parameter*> ps, const std::vector<nn::NamedTensor>& ts,
                          const std::string& prefix)
{
    for (nn::Parameter* p : ps) {
        const auto* t = nn::find_tensor(ts, prefix + p->name);
        if (!t)
            throw ParseError("checkpoint missing tensor " + prefix + p->name);
        if (t->data.size() != p->value.data.size())
            throw ParseError("checkpoint tensor size mismatch for " + p->name);
        p->value.data = t->data;
        const auto* m = nn::find_tensor(ts, prefix + p->name + ".m");
        const auto* v = nn::find_tensor(ts, prefix + p->name + ".v");
        if (!m || !v || m->data.size() != p->m.data.size() || v->data.size() != p->v.data.size())
            throw ParseError("checkpoint missing Adam state for " + p->name);
        p->m.data = m->data;
        p->v.data = v->data;
        if (p->spectral) {
            const auto* u = nn::find_tensor(ts, prefix + p->name + ".u");
            if (!u || u->data.size() != p->u.size())
                throw ParseError("checkpoint missing spectral state for " + p->name);
            p->u = u->data;
        }
    }
}

std::vector<nn::NamedTensor> Generator::state(const std::string& prefix) const
{
    std::vector<const nn::Parameter*> ps;
    ps.push_back(&head_.w);
    ps.push_back(&head_.b);
    for (const auto& blk : blocks_) {
        ps.push_back(&blk.conv1.w);
        ps.push_back(&blk.conv1.b);
        ps.push_back(&blk.conv2.w);
        ps.push_back(&blk.conv2.b);
    }
    ps.push_back(&tail_.w);
    ps.push_back(&tail_.b);
    ps.push_back(&out_conv_.w);
    ps.push_back(&out_conv_.b);
    return parameter_state(ps, prefix);
}

void Generator::load_state(const std::vector<nn::NamedTensor>& ts, const std::string& prefix)
{
    load_parameter_state(params(), ts, prefix);
}

std::vector<nn::NamedTensor> Discriminator::state(const std::string& prefix) const
{
    std::vector<const nn::Parameter*> ps;
    for (const auto& c : convs_) {
        ps.push_back(&c.w);
        ps.push_back(&c.b);
    }
    ps.push_back(&fc_w_);
    ps.push_back(&fc_b_);
    return parameter_state(ps, prefix);
}

void Discriminator::load_state(const std::vector<nn::NamedTensor>& ts, const std::string& prefix)
{
    load_parameter_state(params(), ts, prefix);
}

} // namespace ctnorm::gan
