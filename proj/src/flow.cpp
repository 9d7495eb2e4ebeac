#include "vgm2p/flow.hpp"

#include <algorithm>
#include <cmath>

namespace vgm2p {

namespace {

void check_batch_model(const AvgVelocityModel& model, const FlowBatch& batch, const char* where) {
    const InputLayout& lay = model.layout();
    if (static_cast<int>(batch.action.shape[1]) != lay.action_dim ||
        static_cast<int>(batch.obs.shape[1]) != lay.obs_dim)
        throw DimensionError(std::string(where) + ": batch dims do not match model layout");
    if (lay.has_cond && batch.c.size() != batch.obs.shape[0])
        throw std::invalid_argument(std::string(where) + ": conditional model needs one c label per row");
}

std::vector<int> ones_labels(std::size_t n) {
    return std::vector<int>(n, 1);
}

double mean_row_sq_norm(const Tensor& resid) {
    const double b = static_cast<double>(resid.shape[0]);
    return sum_squares(resid) / b;
}

// target = v - (k - r) .* du, rows scaled individually
Tensor combine_target(const Tensor& v, const Tensor& k, const Tensor& r, const Tensor& du) {
    Tensor out = v;
    const std::size_t d = out.shape[1];
    for (std::size_t i = 0; i < out.shape[0]; ++i) {
        const double gap = k.data[i] - r.data[i];
        for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] -= gap * du.data[i * d + j];
    }
    return out;
}

}  // namespace

FlowBatch make_flow_batch(const Tensor& obs, const Tensor& action, const std::vector<int>& c_labels, Rng& rng,
                          double r_equals_k_fraction) {
    if (obs.rank() != 2 || action.rank() != 2) throw std::invalid_argument("make_flow_batch: obs/action must be rank-2");
    const std::size_t b = obs.shape[0];
    if (b == 0) throw std::invalid_argument("make_flow_batch: empty batch");
    if (action.shape[0] != b) throw std::invalid_argument("make_flow_batch: obs/action row counts differ");
    if (!c_labels.empty() && c_labels.size() != b)
        throw std::invalid_argument("make_flow_batch: c label count mismatch");
    if (r_equals_k_fraction < 0.0 || r_equals_k_fraction > 1.0)
        throw std::invalid_argument("make_flow_batch: r_equals_k_fraction out of [0,1]");

    FlowBatch batch;
    batch.obs = obs;
    batch.action = action;
    batch.c = c_labels;
    batch.k = Tensor::zeros({b});
    batch.r = Tensor::zeros({b});
    for (std::size_t i = 0; i < b; ++i) {
        double u1 = rng.uniform();
        double u2 = rng.uniform();
        if (u1 < u2) std::swap(u1, u2);
        const bool collapse = rng.uniform() < r_equals_k_fraction;
        batch.k.data[i] = u1;
        batch.r.data[i] = collapse ? u1 : u2;
    }
    batch.epsilon = rng.normal_tensor({b, action.shape[1]});
    return batch;
}

Tensor interpolate_action(const Tensor& action, const Tensor& epsilon, const Tensor& k) {
    if (!action.same_shape(epsilon) || k.shape[0] != action.shape[0])
        throw DimensionError("interpolate_action: shape mismatch");
    Tensor out = action;
    const std::size_t d = out.shape[1];
    for (std::size_t i = 0; i < out.shape[0]; ++i) {
        const double ki = k.data[i];
        for (std::size_t j = 0; j < d; ++j)
            out.data[i * d + j] = (1.0 - ki) * action.data[i * d + j] + ki * epsilon.data[i * d + j];
    }
    return out;
}

Tensor sample_velocity(const Tensor& action, const Tensor& epsilon) {
    return sub(epsilon, action);
}

AvgVelocityNet AvgVelocityNet::make(const InputLayout& layout, const std::vector<int>& hidden_dims, Activation act,
                                    std::uint64_t seed) {
    AvgVelocityNet model;
    model.layout_ = layout;
    std::vector<int> dims;
    dims.push_back(layout.width());
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(layout.action_dim);
    model.net = make_mlp(dims, act, seed);
    if (layout.has_cond) {
        const double bound = std::sqrt(6.0 / static_cast<double>(2 + layout.embed_dim));
        Rng embed_rng = Rng(seed).fork(0xC0ND);
        model.cond_embed = embed_rng.uniform_tensor({2, static_cast<std::size_t>(layout.embed_dim)}, -bound, bound);
    }
    return model;
}

Tensor AvgVelocityNet::assemble_input(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                                      const std::vector<int>& c) const {
    const std::size_t b = a_k.shape[0];
    if (static_cast<int>(a_k.shape[1]) != layout_.action_dim)
        throw DimensionError("velocity net: action width " + std::to_string(a_k.shape[1]) + ", layout expects " +
                             std::to_string(layout_.action_dim));
    if (static_cast<int>(obs.shape[1]) != layout_.obs_dim)
        throw DimensionError("velocity net: obs width " + std::to_string(obs.shape[1]) + ", layout expects " +
                             std::to_string(layout_.obs_dim));
    if (k.shape[0] != b || obs.shape[0] != b || (layout_.has_r && r.shape[0] != b))
        throw DimensionError("velocity net: row count mismatch");
    if (layout_.has_cond && c.size() != b)
        throw std::invalid_argument("velocity net: conditional layout needs one c label per row");

    Tensor input = Tensor::zeros({b, static_cast<std::size_t>(layout_.width())});
    const std::size_t d = a_k.shape[1];
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t col = 0;
        for (std::size_t j = 0; j < d; ++j) input.at(i, col++) = a_k.at(i, j);
        input.at(i, col++) = k.data[i];
        if (layout_.has_r) input.at(i, col++) = r.data[i];
        for (std::size_t j = 0; j < obs.shape[1]; ++j) input.at(i, col++) = obs.at(i, j);
        if (layout_.has_cond) {
            const int label = c[i];
            if (label != 0 && label != 1)
                throw std::invalid_argument("velocity net: condition label must be 0 or 1, got " +
                                            std::to_string(label));
            for (int j = 0; j < layout_.embed_dim; ++j)
                input.at(i, col++) = cond_embed.at(static_cast<std::size_t>(label), static_cast<std::size_t>(j));
        }
    }
    return input;
}

Tensor AvgVelocityNet::evaluate(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                                const std::vector<int>& c) const {
    return mlp_forward(net, assemble_input(a_k, k, r, obs, c));
}

DualTensor AvgVelocityNet::evaluate_jvp(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                                        const std::vector<int>& c, const Tensor& da, const Tensor& dk,
                                        const Tensor& dr) const {
    if (!da.same_shape(a_k) || dk.shape[0] != k.shape[0] || (layout_.has_r && dr.shape[0] != k.shape[0]))
        throw DimensionError("velocity net: tangent shape mismatch");
    Tensor input = assemble_input(a_k, k, r, obs, c);
    Tensor tangent = Tensor::zeros(input.shape);
    const std::size_t d = a_k.shape[1];
    for (std::size_t i = 0; i < input.shape[0]; ++i) {
        std::size_t col = 0;
        for (std::size_t j = 0; j < d; ++j) tangent.at(i, col++) = da.at(i, j);
        tangent.at(i, col++) = dk.data[i];
        if (layout_.has_r) tangent.at(i, col++) = dr.data[i];
        // obs and condition-embedding tangents stay zero
    }
    return mlp_jvp(net, DualTensor(std::move(input), std::move(tangent)));
}

std::vector<Tensor*> AvgVelocityNet::parameters() {
    std::vector<Tensor*> out = mlp_parameters(net);
    if (layout_.has_cond) out.push_back(&cond_embed);
    return out;
}

std::vector<const Tensor*> AvgVelocityNet::parameters() const {
    std::vector<const Tensor*> out = mlp_parameters(net);
    if (layout_.has_cond) out.push_back(&cond_embed);
    return out;
}

double fm_loss(const AvgVelocityModel& model, const FlowBatch& batch) {
    if (model.layout().has_r)
        throw std::invalid_argument("fm_loss: model must use the flow-matching layout (no r input)");
    check_batch_model(model, batch, "fm_loss");
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor v = model.evaluate(a_k, batch.k, batch.r, batch.obs, batch.c);
    const double loss = mean_row_sq_norm(sub(v, sample_velocity(batch.action, batch.epsilon)));
    if (!std::isfinite(loss)) throw NumericError("fm_loss: non-finite loss", loss);
    return loss;
}

Tensor mf_target(const AvgVelocityModel& model, const FlowBatch& batch) {
    check_batch_model(model, batch, "mf_target");
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor v_c = sample_velocity(batch.action, batch.epsilon);
    const Tensor dk = Tensor::filled({batch.k.shape[0]}, 1.0);
    const Tensor dr = Tensor::zeros({batch.k.shape[0]});
    const DualTensor u = model.evaluate_jvp(a_k, batch.k, batch.r, batch.obs, batch.c, v_c, dk, dr);
    Tensor target = combine_target(v_c, batch.k, batch.r, u.tangent);
    ensure_finite(target, "mf_target");
    return target;
}

double mf_loss(const AvgVelocityModel& model, const FlowBatch& batch) {
    if (!model.layout().has_r) throw std::invalid_argument("mf_loss: model must take an r input");
    const Tensor target = mf_target(model, batch);
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor u = model.evaluate(a_k, batch.k, batch.r, batch.obs, batch.c);
    const double loss = mean_row_sq_norm(sub(u, target));
    if (!std::isfinite(loss)) throw NumericError("mf_loss: non-finite loss", loss);
    return loss;
}

Tensor cfg_field(const AvgVelocityModel& model, const FlowBatch& batch, double omega) {
    if (!model.layout().has_cond) throw std::invalid_argument("cfg_field: model must be conditional");
    check_batch_model(model, batch, "cfg_field");
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor v_c = sample_velocity(batch.action, batch.epsilon);
    // unconditional branch: the model itself at r = k, condition fixed to 1
    const Tensor u_uncond = model.evaluate(a_k, batch.k, batch.k, batch.obs, ones_labels(a_k.shape[0]));
    Tensor out = Tensor::zeros(v_c.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = omega * v_c.data[i] + (1.0 - omega) * u_uncond.data[i];
    return out;
}

Tensor vgmp_target(const AvgVelocityModel& model, const FlowBatch& batch, double omega) {
    const Tensor v_cfg = cfg_field(model, batch, omega);
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor dk = Tensor::filled({batch.k.shape[0]}, 1.0);
    const Tensor dr = Tensor::zeros({batch.k.shape[0]});
    const DualTensor u = model.evaluate_jvp(a_k, batch.k, batch.r, batch.obs, batch.c, v_cfg, dk, dr);
    Tensor target = combine_target(v_cfg, batch.k, batch.r, u.tangent);
    ensure_finite(target, "vgmp_target");
    return target;
}

double vgmp_loss(const AvgVelocityModel& model, const FlowBatch& batch, double omega) {
    const Tensor target = vgmp_target(model, batch, omega);
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    const Tensor u = model.evaluate(a_k, batch.k, batch.r, batch.obs, batch.c);
    const double loss = mean_row_sq_norm(sub(u, target));
    if (!std::isfinite(loss)) throw NumericError("vgmp_loss: non-finite loss", loss);
    return loss;
}

Tensor sample_one_step(const AvgVelocityModel& model, const Tensor& obs, int c, Rng& rng) {
    const std::size_t b = obs.shape[0];
    const std::size_t d = static_cast<std::size_t>(model.layout().action_dim);
    const Tensor a1 = rng.normal_tensor({b, d});
    const Tensor k = Tensor::filled({b}, 1.0);
    const Tensor r = Tensor::zeros({b});
    const Tensor u = model.evaluate(a1, k, r, obs, std::vector<int>(b, c));
    return sub(a1, u);
}

Tensor sample_multi_step(const AvgVelocityModel& model, const Tensor& obs, int c, int n_steps, Rng& rng) {
    if (n_steps < 1) throw std::invalid_argument("sample_multi_step: n_steps must be >= 1");
    const std::size_t b = obs.shape[0];
    const std::size_t d = static_cast<std::size_t>(model.layout().action_dim);
    const std::vector<int> labels(b, c);
    Tensor a = rng.normal_tensor({b, d});
    for (int step = 0; step < n_steps; ++step) {
        const double k = 1.0 - static_cast<double>(step) / n_steps;
        const double r = 1.0 - static_cast<double>(step + 1) / n_steps;
        const Tensor kt = Tensor::filled({b}, k);
        const Tensor rt = Tensor::filled({b}, r);
        const Tensor u = model.evaluate(a, kt, rt, obs, labels);
        for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] -= (k - r) * u.data[i];
    }
    return a;
}

namespace {

// Shared reverse-mode pass: (net output at the batch point) vs a detached
// target, mean squared norm per row.
LossValueGrad net_regression_grad(const AvgVelocityNet& net, const FlowBatch& batch, const Tensor& target,
                                  const Tensor& a_k) {
    ad::Tape tape;
    std::vector<ad::Tape::NodeId> trunk = lift_mlp(tape, net.net);
    const InputLayout& lay = net.layout();

    std::vector<ad::Tape::NodeId> pieces;
    pieces.push_back(tape.constant(a_k));
    Tensor k_col = Tensor::zeros({batch.k.shape[0], 1});
    for (std::size_t i = 0; i < batch.k.shape[0]; ++i) k_col.at(i, 0) = batch.k.data[i];
    pieces.push_back(tape.constant(std::move(k_col)));
    if (lay.has_r) {
        Tensor r_col = Tensor::zeros({batch.r.shape[0], 1});
        for (std::size_t i = 0; i < batch.r.shape[0]; ++i) r_col.at(i, 0) = batch.r.data[i];
        pieces.push_back(tape.constant(std::move(r_col)));
    }
    pieces.push_back(tape.constant(batch.obs));

    ad::Tape::NodeId embed_id = -1;
    if (lay.has_cond) {
        embed_id = tape.leaf(net.cond_embed);
        pieces.push_back(tape.gather_rows(embed_id, batch.c));
    }

    const ad::Tape::NodeId input = tape.concat_cols(pieces);
    const ad::Tape::NodeId out = mlp_on_tape(tape, net.net, trunk, input);
    const ad::Tape::NodeId resid = tape.sub(out, tape.constant(target));
    const ad::Tape::NodeId root = tape.scale(tape.sum_squares(resid), 1.0 / static_cast<double>(batch.obs.shape[0]));

    std::vector<ad::Tape::NodeId> wrt = trunk;
    if (lay.has_cond) wrt.push_back(embed_id);

    LossValueGrad result;
    result.loss = tape.scalar(root);
    if (!std::isfinite(result.loss)) throw NumericError("flow loss: non-finite loss", result.loss);
    result.grads = tape.gradients(root, wrt);
    return result;
}

}  // namespace

LossValueGrad fm_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch) {
    if (net.layout().has_r)
        throw std::invalid_argument("fm_loss_grad: model must use the flow-matching layout (no r input)");
    check_batch_model(net, batch, "fm_loss_grad");
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    return net_regression_grad(net, batch, sample_velocity(batch.action, batch.epsilon), a_k);
}

LossValueGrad mf_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch) {
    if (!net.layout().has_r) throw std::invalid_argument("mf_loss_grad: model must take an r input");
    const Tensor target = mf_target(net, batch);
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    return net_regression_grad(net, batch, target, a_k);
}

LossValueGrad vgmp_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch, double omega) {
    const Tensor target = vgmp_target(net, batch, omega);
    const Tensor a_k = interpolate_action(batch.action, batch.epsilon, batch.k);
    return net_regression_grad(net, batch, target, a_k);
}

}  // namespace vgm2p
