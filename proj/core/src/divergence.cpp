#include "taskforge/divergence.hpp"

#include "taskforge/errors.hpp"

namespace taskforge {

DivKind divkind_from_string(const std::string& s) {
  if (s == "l2" || s == "mse") return DivKind::L2;
  if (s == "l1") return DivKind::L1;
  if (s == "bce") return DivKind::BCE;
  if (s == "ce" || s == "cross_entropy") return DivKind::CE;
  if (s == "kl_gaussian" || s == "klgauss") return DivKind::KLGauss;
  if (s == "ssim") return DivKind::SSIM;
  fail("BadConfig", "unknown divergence '" + s + "'");
}

std::string divkind_to_string(DivKind k) {
  switch (k) {
    case DivKind::L2: return "l2";
    case DivKind::L1: return "l1";
    case DivKind::BCE: return "bce";
    case DivKind::CE: return "ce";
    case DivKind::KLGauss: return "kl_gaussian";
    case DivKind::SSIM: return "ssim";
  }
  return "?";
}

Divergence Divergence::composite(std::vector<std::pair<float, DivKind>> ts) {
  Divergence d{std::move(ts)};
  if (!d.valid())
    fail("NonPositiveWeight", "composite divergence weights must be > 0");
  return d;
}

bool Divergence::valid() const {
  if (terms.empty()) return false;
  for (const auto& [w, k] : terms)
    if (!(w > 0.0f)) return false;
  return true;
}

std::string Divergence::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) s += " + ";
    if (terms[i].first != 1.0f)
      s += std::to_string(terms[i].first) + "*";
    s += divkind_to_string(terms[i].second);
  }
  return s;
}

bool divkind_is_positive(DivKind k) {
  return k == DivKind::L2 || k == DivKind::L1;
}

bool divergence_is_positive(const Divergence& d) {
  if (!d.valid()) return false;
  for (const auto& [w, k] : d.terms)
    if (!divkind_is_positive(k)) return false;
  return true;
}

static NodeId apply_kind(Tape& t, DivKind k, NodeId u, NodeId v) {
  switch (k) {
    case DivKind::L2: return t.div_l2(u, v);
    case DivKind::L1: return t.div_l1(u, v);
    case DivKind::BCE: return t.div_bce(u, v);
    case DivKind::CE: return t.div_ce(u, v);
    case DivKind::KLGauss: return t.div_klgauss(u, v);
    case DivKind::SSIM: return t.div_ssim(u, v);
  }
  fail("BadConfig", "bad divergence kind");
}

NodeId divergence_apply(Tape& t, const Divergence& d, NodeId u, NodeId v) {
  if (!d.valid())
    fail("NonPositiveWeight", "divergence has no valid terms");
  NodeId acc = -1;
  bool first = true;
  float first_w = 1.0f;
  for (const auto& [w, k] : d.terms) {
    NodeId term = apply_kind(t, k, u, v);
    if (first) {
      acc = term;
      first_w = w;
      first = false;
    } else {
      acc = t.wadd(acc, term, first_w, w);
      first_w = 1.0f;
    }
  }
  if (d.terms.size() == 1 && first_w != 1.0f) acc = t.scale(acc, first_w);
  return acc;
}

} // namespace taskforge
