#include "taskforge/fixedfn.hpp"

namespace taskforge {

FixedFnInfo fixed_info(const std::string& fn) {
  if (fn == "add" || fn == "subtract" || fn == "wadd" || fn == "concat" ||
      fn == "split" || fn == "clamp")
    return {true, false, false};
  if (fn == "gaussian_sampler") return {true, true, false};
  if (fn == "sqdist" || fn == "absdist") return {true, false, true};
  return {false, false, false};
}

std::string fixed_typecheck(const Box& b) {
  const std::string& fn = b.fn;
  auto err = [&](const std::string& msg) { return "fixed '" + b.id + "' (" + fn + "): " + msg; };
  if (!fixed_info(fn).known) return err("unknown function");

  if (fn == "add" || fn == "subtract" || fn == "wadd") {
    if (b.ins.size() != 2 || b.outs.size() != 1) return err("needs T,T -> T");
    if (b.ins[0] != b.ins[1] || b.ins[0] != b.outs[0])
      return err("all three wire types must agree");
    if (fn == "wadd" && b.args.size() != 2) return err("needs two weight args");
  } else if (fn == "concat") {
    if (b.ins.size() != 2 || b.outs.size() != 1) return err("needs A,B -> C");
    if (b.ins[0].dim + b.ins[1].dim != b.outs[0].dim)
      return err("output dim must be the sum of input dims");
  } else if (fn == "split") {
    if (b.ins.size() != 1 || b.outs.size() != 2) return err("needs C -> A,B");
    if (b.outs[0].dim + b.outs[1].dim != b.ins[0].dim)
      return err("input dim must be the sum of output dims");
  } else if (fn == "clamp") {
    if (b.ins.size() != 1 || b.outs.size() != 1) return err("needs T -> T'");
    if (b.ins[0].dim != b.outs[0].dim) return err("dims must agree");
    if (b.args.size() != 2 || !(b.args[0] < b.args[1]))
      return err("needs args (lo, hi) with lo < hi");
  } else if (fn == "gaussian_sampler") {
    if (b.ins.size() != 1 || b.outs.size() != 1) return err("needs P -> L");
    if (b.ins[0].dim != 2 * b.outs[0].dim)
      return err("input dim must be twice the output dim");
  } else if (fn == "sqdist" || fn == "absdist") {
    if (b.ins.size() != 2 || b.outs.size() != 1) return err("needs T,T -> nonneg(1)");
    if (b.ins[0] != b.ins[1]) return err("input types must agree");
    if (b.outs[0].dim != 1 || b.outs[0].kind != WireKind::Nonneg)
      return err("output must be a nonneg scalar");
  }
  return "";
}

std::vector<NodeId> fixed_eval(Tape& t, const Box& b,
                               const std::vector<NodeId>& ins, Rng& rng) {
  const std::string& fn = b.fn;
  if (fn == "add") return {t.add(ins[0], ins[1])};
  if (fn == "subtract") return {t.sub(ins[0], ins[1])};
  if (fn == "wadd") return {t.wadd(ins[0], ins[1], b.args[0], b.args[1])};
  if (fn == "concat") return {t.concat(ins)};
  if (fn == "split") {
    int d0 = b.outs[0].dim, d1 = b.outs[1].dim;
    return {t.slice(ins[0], 0, d0), t.slice(ins[0], d0, d0 + d1)};
  }
  if (fn == "clamp") return {t.clamp(ins[0], b.args[0], b.args[1])};
  if (fn == "gaussian_sampler") return {t.gauss_sample(ins[0], rng)};
  if (fn == "sqdist") return {t.div_l2(ins[0], ins[1])};
  if (fn == "absdist") return {t.div_l1(ins[0], ins[1])};
  fail("UnknownFn", "fixed function '" + fn + "'");
}

} // namespace taskforge
