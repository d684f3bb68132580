// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/registry/registry.hpp"

#include <sstream>

#include "m3i/error.hpp"

namespace m3i::registry {

using core::ReprKind;
using heads::Family;
using heads::Mechanism;
using nn::TargetKind;

const char* to_string(InputTransform t) {
  switch (t) {
    case InputTransform::view1: return "view1";
    case InputTransform::masked_view1: return "masked_view1";
    case InputTransform::view2: return "view2";
    case InputTransform::masked_view2: return "masked_view2";
  }
  return "?";
}

const char* to_string(TargetTransform t) {
  switch (t) {
    case TargetTransform::view1: return "view1";
    case TargetTransform::category: return "category";
    case TargetTransform::text: return "text";
  }
  return "?";
}

namespace {

MethodConfig base(const std::string& name, InputTransform in, TargetTransform tgt, ReprKind repr,
                  Family fam, Mechanism mech, TargetKind tk) {
  MethodConfig c;
  c.name = name;
  c.input_transform = in;
  c.target_transform = tgt;
  c.target_repr = repr;
  c.head.family = fam;
  c.regularizer.mechanism = mech;
  c.target_encoder.kind = tk;
  return c;
}

MethodConfig make_instance_discrimination(Mechanism mech) {
  // Boltzmann with in-batch negatives, or Gaussian under the asymmetric
  // (stop-gradient) and decorrelation mechanisms.
  const Family fam = mech == Mechanism::negatives ? Family::boltzmann : Family::gaussian;
  MethodConfig c = base("instance_discrimination", InputTransform::view2, TargetTransform::view1,
                        ReprKind::global_feature, fam, mech, TargetKind::shared);
  c.head.normalize_embeddings = fam == Family::boltzmann;
  return c;
}

}  // namespace

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {
      "auto_encoder",
      "dense_distillation",
      "global_distillation",
      "mim_pixel",
      "mim_feature",
      "mim_global",
      "novel_view_synthesis",
      "dense_instance_discrimination",
      "instance_discrimination",
      "sim_pixel",
      "sim_feature",
      "sim_global",
      "image_classification",
      "clip",
      "m3i",
  };
  return names;
}

MethodConfig get_method(const std::string& full_name) {
  std::string name = full_name;
  Mechanism id_mech = Mechanism::negatives;
  Mechanism gd_mech = Mechanism::stop_gradient;
  // optional "[mech=...]" parameterization of the mechanism-ablatable rows
  if (auto lb = full_name.find('['); lb != std::string::npos) {
    if (full_name.back() != ']') throw UnknownMethod(full_name);
    name = full_name.substr(0, lb);
    const std::string opt = full_name.substr(lb + 1, full_name.size() - lb - 2);
    if (opt.rfind("mech=", 0) != 0) throw UnknownMethod(full_name);
    const std::string mech = opt.substr(5);
    if (name == "instance_discrimination") {
      if (mech == "negatives") id_mech = Mechanism::negatives;
      else if (mech == "stop_gradient") id_mech = Mechanism::stop_gradient;
      else if (mech == "decorrelation") id_mech = Mechanism::decorrelation;
      else throw UnknownMethod(full_name);
    } else if (name == "global_distillation") {
      if (mech == "stop_gradient") gd_mech = Mechanism::stop_gradient;
      else if (mech == "none") gd_mech = Mechanism::none;
      else throw UnknownMethod(full_name);
    } else {
      throw UnknownMethod(full_name);
    }
  }

  if (name == "auto_encoder")
    return base(name, InputTransform::view1, TargetTransform::view1, ReprKind::dense_pixels,
                Family::gaussian, Mechanism::none, TargetKind::identity_pixels);
  if (name == "dense_distillation")
    return base(name, InputTransform::view1, TargetTransform::view1, ReprKind::dense_feature,
                Family::gaussian, Mechanism::stop_gradient, TargetKind::shared);
  if (name == "global_distillation") {
    MethodConfig c = base(name, InputTransform::view1, TargetTransform::view1,
                          ReprKind::global_feature, Family::boltzmann, gd_mech,
                          TargetKind::shared);
    c.experimental = true;
    return c;
  }
  if (name == "mim_pixel") {
    MethodConfig c = base(name, InputTransform::masked_view1, TargetTransform::view1,
                          ReprKind::dense_pixels, Family::gaussian, Mechanism::none,
                          TargetKind::identity_pixels);
    c.loss_on_masked_only = true;
    return c;
  }
  if (name == "mim_feature") {
    MethodConfig c = base(name, InputTransform::masked_view1, TargetTransform::view1,
                          ReprKind::dense_feature, Family::gaussian, Mechanism::ema_target,
                          TargetKind::momentum);
    c.loss_on_masked_only = true;
    return c;
  }
  if (name == "mim_global") {
    MethodConfig c = base(name, InputTransform::masked_view1, TargetTransform::view1,
                          ReprKind::global_feature, Family::gaussian, Mechanism::ema_target,
                          TargetKind::momentum);
    c.experimental = true;
    return c;
  }
  if (name == "novel_view_synthesis") {
    MethodConfig c = base(name, InputTransform::view2, TargetTransform::view1,
                          ReprKind::dense_pixels, Family::gaussian, Mechanism::none,
                          TargetKind::identity_pixels);
    c.experimental = true;
    return c;
  }
  if (name == "dense_instance_discrimination") {
    MethodConfig c = base(name, InputTransform::view2, TargetTransform::view1,
                          ReprKind::dense_feature, Family::boltzmann, Mechanism::negatives,
                          TargetKind::shared);
    c.head.normalize_embeddings = true;
    return c;
  }
  if (name == "instance_discrimination") return make_instance_discrimination(id_mech);
  if (name == "sim_pixel") {
    MethodConfig c = base(name, InputTransform::masked_view2, TargetTransform::view1,
                          ReprKind::dense_pixels, Family::gaussian, Mechanism::none,
                          TargetKind::identity_pixels);
    c.experimental = true;
    return c;
  }
  if (name == "sim_feature")
    return base(name, InputTransform::masked_view2, TargetTransform::view1,
                ReprKind::dense_feature, Family::gaussian, Mechanism::ema_target,
                TargetKind::momentum);
  if (name == "sim_global") {
    MethodConfig c = base(name, InputTransform::masked_view2, TargetTransform::view1,
                          ReprKind::global_feature, Family::boltzmann, Mechanism::negatives,
                          TargetKind::momentum);
    c.head.normalize_embeddings = true;
    return c;
  }
  if (name == "image_classification") {
    MethodConfig c = base(name, InputTransform::view1, TargetTransform::category,
                          ReprKind::category_embedding, Family::boltzmann, Mechanism::negatives,
                          TargetKind::category_table);
    c.label_smoothing = 0.1;
    return c;
  }
  if (name == "clip") {
    MethodConfig c = base(name, InputTransform::view1, TargetTransform::text,
                          ReprKind::text_embedding, Family::boltzmann, Mechanism::negatives,
                          TargetKind::text_encoder);
    c.head.normalize_embeddings = true;
    return c;
  }
  if (name == "m3i") {
    MethodConfig c = base(name, InputTransform::masked_view1, TargetTransform::view1,
                          ReprKind::dense_feature, Family::gaussian, Mechanism::ema_target,
                          TargetKind::momentum);
    c.is_m3i = true;
    c.semantic_target = TargetTransform::category;
    c.label_smoothing = 0.1;
    c.gamma = 1.0;
    return c;
  }
  throw UnknownMethod(full_name);
}

std::vector<std::string> validate_method(const MethodConfig& cfg) {
  std::vector<std::string> v;
  const bool dense = core::is_dense(cfg.target_repr);

  if (cfg.head.family == Family::gaussian && cfg.regularizer.mechanism == Mechanism::negatives)
    v.push_back("negatives require a Boltzmann head");
  if (cfg.head.family == Family::gaussian && cfg.head.sigma <= 0.0)
    v.push_back("gaussian head needs sigma > 0");
  if (cfg.head.family == Family::boltzmann && cfg.head.tau <= 0.0)
    v.push_back("boltzmann head needs tau > 0");

  if (cfg.target_repr == ReprKind::category_embedding &&
      cfg.target_transform != TargetTransform::category)
    v.push_back("category_embedding target requires target_transform=category");
  if (cfg.target_repr == ReprKind::text_embedding && cfg.target_transform != TargetTransform::text)
    v.push_back("text_embedding target requires target_transform=text");
  if ((cfg.target_repr == ReprKind::dense_pixels || cfg.target_repr == ReprKind::dense_feature ||
       cfg.target_repr == ReprKind::global_feature) &&
      cfg.target_transform != TargetTransform::view1 && !cfg.is_m3i)
    v.push_back("image-representation targets require target_transform=view1");

  if (cfg.target_repr == ReprKind::dense_pixels &&
      (cfg.regularizer.mechanism == Mechanism::stop_gradient ||
       cfg.regularizer.mechanism == Mechanism::ema_target))
    v.push_back("gradient stopping on raw pixel targets is meaningless");
  if (cfg.target_repr == ReprKind::dense_pixels &&
      cfg.regularizer.mechanism == Mechanism::decorrelation)
    v.push_back("decorrelation applies to feature targets only");

  if (cfg.regularizer.mechanism == Mechanism::ema_target &&
      cfg.target_encoder.kind != TargetKind::momentum)
    v.push_back("ema_target mechanism requires a momentum target encoder");
  if (cfg.regularizer.mechanism == Mechanism::stop_gradient &&
      cfg.target_encoder.kind != TargetKind::shared)
    v.push_back("stop_gradient mechanism requires a shared target encoder");
  if (cfg.target_encoder.kind == TargetKind::momentum &&
      !(cfg.regularizer.ema_coeff > 0.0 && cfg.regularizer.ema_coeff < 1.0))
    v.push_back("momentum target encoder needs ema_coeff in (0,1)");

  if (cfg.head.family == Family::boltzmann && dense &&
      cfg.regularizer.mechanism != Mechanism::negatives)
    v.push_back("Boltzmann heads with dense targets use in-batch + in-grid negatives");

  if (cfg.regularizer.mechanism == Mechanism::negatives &&
      cfg.target_repr == ReprKind::dense_pixels)
    v.push_back("negatives need an embedding target, not raw pixels");

  if (cfg.is_m3i) {
    if (cfg.gamma <= 0.0) v.push_back("gamma must be > 0");
    if (cfg.semantic_target == TargetTransform::view1)
      v.push_back("the combined method needs a category or text semantic target");
  }

  if (is_masked(cfg.input_transform) && is_intra_view(cfg.input_transform) && dense &&
      !cfg.loss_on_masked_only && !cfg.is_m3i)
    v.push_back("warning: masked intra-view input usually restricts the loss to masked positions");

  return v;
}

bool is_valid(const std::vector<std::string>& violations) {
  for (const auto& s : violations)
    if (s.rfind("warning:", 0) != 0) return false;
  return true;
}

core::BatchRequirements requirements_of(const MethodConfig& cfg) {
  core::BatchRequirements req;
  req.method_name = cfg.name;
  const TargetTransform sem = cfg.is_m3i ? cfg.semantic_target : cfg.target_transform;
  req.needs_category = sem == TargetTransform::category;
  req.needs_caption = sem == TargetTransform::text;
  return req;
}

std::string list_methods_tsv() {
  std::ostringstream os;
  for (const auto& name : catalog_names()) {
    MethodConfig c = get_method(name);
    os << c.name << "\t" << (c.is_m3i ? "mixed_masked_views" : to_string(c.input_transform))
       << "\t";
    if (c.is_m3i)
      os << "view1+view2+" << to_string(c.semantic_target);
    else
      os << to_string(c.target_transform);
    os << "\t" << core::to_string(c.target_repr) << "\t"
       << (c.head.family == Family::gaussian ? "gaussian" : "boltzmann") << "\t"
       << heads::to_string(c.regularizer.mechanism) << "\n";
  }
  return os.str();
}

}  // namespace m3i::registry
