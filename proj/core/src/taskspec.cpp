#include "taskforge/taskspec.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <set>

#include <nlohmann/json.hpp>

#include "taskforge/errors.hpp"
#include "taskforge/finite.hpp"
#include "taskforge/mnist.hpp"
#include "taskforge/sprites.hpp"

namespace taskforge {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& msg) {
  fail("BadSpec", where + ": " + msg);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) bad(where, "unknown key '" + it.key() + "'");
  }
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    bad(where, std::string("missing required key '") + key + "'");
  return j.at(key);
}

std::string need_str(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_string()) bad(where, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

double num_or(const json& j, const char* key, double dflt,
              const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  if (!j.at(key).is_number())
    bad(where, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::int64_t int_or(const json& j, const char* key, std::int64_t dflt,
                    const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  if (!j.at(key).is_number_integer())
    bad(where, std::string("'") + key + "' must be an integer");
  return j.at(key).get<std::int64_t>();
}

bool bool_or(const json& j, const char* key, bool dflt,
             const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  if (!j.at(key).is_boolean())
    bad(where, std::string("'") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

std::string str_or(const json& j, const char* key, const std::string& dflt,
                   const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  if (!j.at(key).is_string())
    bad(where, std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

WireKind parse_wire_kind(const std::string& s, const std::string& where) {
  if (s == "real") return WireKind::Real;
  if (s == "nonneg") return WireKind::Nonneg;
  if (s == "onehot") return WireKind::OneHot;
  if (s == "unit") return WireKind::Unit;
  bad(where, "unknown wire kind '" + s + "'");
}

} // namespace

WireType parse_wire_type(const json& j,
                         const std::map<std::string, WireType>& named) {
  if (j.is_string()) {
    auto it = named.find(j.get<std::string>());
    if (it == named.end())
      fail("UnknownType", "wire type '" + j.get<std::string>() +
                              "' is not in the types map");
    return it->second;
  }
  const std::string where = "wire type";
  check_keys(j, where, {"name", "dim", "kind"});
  WireType t;
  t.name = need_str(j, "name", where);
  t.dim = static_cast<int>(int_or(j, "dim", 0, where));
  if (t.dim < 1) bad(where, "'dim' must be a positive integer");
  t.kind = parse_wire_kind(need_str(j, "kind", where), where);
  return t;
}

Divergence parse_divergence(const json& j) {
  const std::string where = "divergence";
  if (j.is_string())
    return Divergence::primitive(divkind_from_string(j.get<std::string>()));
  if (!j.is_array() || j.empty())
    bad(where, "expected a name or a non-empty [kind, weight] list");
  std::vector<std::pair<float, DivKind>> terms;
  for (const json& t : j) {
    if (!t.is_array() || t.size() != 2 || !t[0].is_string() ||
        !t[1].is_number())
      bad(where, "each term must be [\"kind\", weight]");
    terms.emplace_back(t[1].get<float>(),
                       divkind_from_string(t[0].get<std::string>()));
  }
  return Divergence::composite(std::move(terms));
}

ParamLayout parse_layout(const json& j) {
  const std::string where = "layout";
  check_keys(j, where, {"dims", "acts", "vector"});
  if (j.contains("vector")) {
    if (j.contains("dims") || j.contains("acts"))
      bad(where, "'vector' excludes 'dims'/'acts'");
    int n = static_cast<int>(int_or(j, "vector", 0, where));
    if (n < 1) bad(where, "'vector' must be a positive integer");
    return VectorLayout{n};
  }
  MlpLayout m;
  const json& dims = need(j, "dims", where);
  const json& acts = need(j, "acts", where);
  if (!dims.is_array() || dims.size() < 2)
    bad(where, "'dims' must list at least [in, out]");
  for (const json& d : dims) {
    if (!d.is_number_integer() || d.get<int>() < 1)
      bad(where, "'dims' entries must be positive integers");
    m.dims.push_back(d.get<int>());
  }
  if (!acts.is_array() || acts.size() != dims.size() - 1)
    bad(where, "'acts' must have one entry per layer (dims - 1)");
  for (const json& a : acts) {
    if (!a.is_string()) bad(where, "'acts' entries must be strings");
    m.acts.push_back(act_from_string(a.get<std::string>()));
  }
  return m;
}

Diagram parse_diagram(const json& j,
                      const std::map<std::string, WireType>& named) {
  const std::string where = "diagram";
  check_keys(j, where, {"inputs", "outputs", "nodes", "edges"});
  Diagram d;
  for (const json& t : need(j, "inputs", where))
    d.inputs.push_back(parse_wire_type(t, named));
  for (const json& t : need(j, "outputs", where))
    d.outputs.push_back(parse_wire_type(t, named));

  auto types_of = [&](const json& node, const char* key,
                      const std::string& nw) {
    std::vector<WireType> out;
    const json& arr = need(node, key, nw);
    if (!arr.is_array()) bad(nw, std::string("'") + key + "' must be a list");
    for (const json& t : arr) out.push_back(parse_wire_type(t, named));
    return out;
  };

  const json& nodes = need(j, "nodes", where);
  if (!nodes.is_array()) bad(where, "'nodes' must be a list");
  for (const json& n : nodes) {
    std::string id = need_str(n, "id", where + " node");
    std::string nw = where + " node '" + id + "'";
    std::string kind = need_str(n, "kind", nw);
    if (kind == "learner") {
      check_keys(n, nw, {"id", "kind", "param", "ins", "outs"});
      d.add_node(learner_box(id, need_str(n, "param", nw),
                             types_of(n, "ins", nw), types_of(n, "outs", nw)));
    } else if (kind == "fixed") {
      check_keys(n, nw, {"id", "kind", "fn", "args", "ins", "outs"});
      std::vector<float> args;
      if (n.contains("args"))
        for (const json& a : n.at("args")) {
          if (!a.is_number()) bad(nw, "'args' entries must be numbers");
          args.push_back(a.get<float>());
        }
      d.add_node(fixed_box(id, need_str(n, "fn", nw), std::move(args),
                           types_of(n, "ins", nw), types_of(n, "outs", nw)));
    } else if (kind == "copy") {
      check_keys(n, nw, {"id", "kind", "type"});
      d.add_node(copy_box(id, parse_wire_type(need(n, "type", nw), named)));
    } else if (kind == "delete") {
      check_keys(n, nw, {"id", "kind", "type"});
      d.add_node(delete_box(id, parse_wire_type(need(n, "type", nw), named)));
    } else if (kind == "swap") {
      check_keys(n, nw, {"id", "kind", "a", "b"});
      d.add_node(swap_box(id, parse_wire_type(need(n, "a", nw), named),
                          parse_wire_type(need(n, "b", nw), named)));
    } else if (kind == "state") {
      check_keys(n, nw, {"id", "kind", "dist", "outs"});
      d.add_node(state_box(id, need_str(n, "dist", nw),
                           types_of(n, "outs", nw)));
    } else if (kind == "const") {
      check_keys(n, nw, {"id", "kind", "type", "value", "param"});
      WireType t = parse_wire_type(need(n, "type", nw), named);
      std::vector<float> value;
      const json& v = need(n, "value", nw);
      if (v.is_number()) {
        value.assign(static_cast<std::size_t>(t.dim), v.get<float>());
      } else if (v.is_array()) {
        if (static_cast<int>(v.size()) != t.dim)
          bad(nw, "'value' must have " + std::to_string(t.dim) + " entries");
        for (const json& x : v) {
          if (!x.is_number()) bad(nw, "'value' entries must be numbers");
          value.push_back(x.get<float>());
        }
      } else {
        bad(nw, "'value' must be a number or a list");
      }
      d.add_node(const_box(id, std::move(t), std::move(value),
                           str_or(n, "param", "", nw)));
    } else {
      bad(nw, "unknown node kind '" + kind + "'");
    }
  }

  const json& edges = need(j, "edges", where);
  if (!edges.is_array()) bad(where, "'edges' must be a list");
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 4 || !e[0].is_string() ||
        !e[1].is_number_integer() || !e[2].is_string() ||
        !e[3].is_number_integer())
      bad(where, "each edge must be [from, port, to, port]");
    d.connect(e[0].get<std::string>(), e[1].get<int>(),
              e[2].get<std::string>(), e[3].get<int>());
  }
  validate_or_throw(d);
  return d;
}

namespace {

// --- distributions -------------------------------------------------------------

SpriteField parse_sprite_field(const std::string& s, const std::string& where) {
  if (s == "image") return SpriteField::Image;
  if (s == "shape") return SpriteField::ShapeOneHot;
  if (s == "hue") return SpriteField::HueOneHot;
  if (s == "cs") return SpriteField::ColourScore;
  if (s == "bc") return SpriteField::BlueCircleness;
  bad(where, "unknown sprite field '" + s + "'");
}

void build_distributions(const json& all,
                         const std::map<std::string, WireType>& types,
                         const std::string& base_dir, DistRegistry& reg) {
  if (all.is_null()) return;
  if (!all.is_object()) bad("distributions", "expected an object");

  std::set<std::string> done, visiting;
  std::function<void(const std::string&)> build = [&](const std::string& name) {
    if (done.count(name)) return;
    if (!all.contains(name))
      bad("distributions", "'" + name + "' is referenced but not defined");
    if (!visiting.insert(name).second)
      bad("distributions", "'" + name + "' depends on itself");
    const json& d = all.at(name);
    const std::string where = "distribution '" + name + "'";
    std::string kind = need_str(d, "kind", where);

    if (kind == "unit") {
      check_keys(d, where, {"kind"});
      reg.add(name, make_unit_sampler());
    } else if (kind == "gaussian") {
      check_keys(d, where, {"kind", "type", "mu", "sigma"});
      reg.add(name, make_gaussian_sampler(
                        parse_wire_type(need(d, "type", where), types),
                        num_or(d, "mu", 0.0, where),
                        num_or(d, "sigma", 1.0, where)));
    } else if (kind == "onehot") {
      check_keys(d, where, {"kind", "type"});
      reg.add(name, make_onehot_uniform_sampler(
                        parse_wire_type(need(d, "type", where), types)));
    } else if (kind == "clamped_uniform") {
      check_keys(d, where,
                 {"kind", "type", "lo", "hi", "clamp_lo", "clamp_hi"});
      reg.add(name, make_clamped_uniform_sampler(
                        parse_wire_type(need(d, "type", where), types),
                        num_or(d, "lo", -0.1, where),
                        num_or(d, "hi", 1.1, where),
                        num_or(d, "clamp_lo", 0.0, where),
                        num_or(d, "clamp_hi", 1.0, where)));
    } else if (kind == "attribute") {
      check_keys(d, where, {"kind", "type", "classes", "fixed"});
      WireType t = parse_wire_type(need(d, "type", where), types);
      AttributeDistribution ad;
      ad.kind = AttributeDistribution::Kind::UniformDiscrete;
      ad.classes = static_cast<int>(int_or(d, "classes", t.dim, where));
      ad.fixed = static_cast<int>(int_or(d, "fixed", -1, where));
      reg.add(name, make_attribute_sampler(std::move(t), ad));
    } else if (kind == "table") {
      check_keys(d, where, {"kind", "types", "rows", "repeats"});
      std::vector<WireType> ts;
      for (const json& t : need(d, "types", where))
        ts.push_back(parse_wire_type(t, types));
      const json& rows = need(d, "rows", where);
      if (!rows.is_array() || rows.empty())
        bad(where, "'rows' must be a non-empty list");
      std::vector<int> repeats(rows.size(), 1);
      if (d.contains("repeats")) {
        const json& reps = d.at("repeats");
        if (!reps.is_array() || reps.size() != rows.size())
          bad(where, "'repeats' must have one entry per row");
        for (std::size_t i = 0; i < reps.size(); ++i) {
          if (!reps[i].is_number_integer() || reps[i].get<int>() < 1)
            bad(where, "'repeats' entries must be positive integers");
          repeats[i] = reps[i].get<int>();
        }
      }
      int total = 0;
      for (int r : repeats) total += r;
      std::vector<Tensor> cols;
      for (const WireType& t : ts) cols.push_back(Tensor::zeros(total, t.dim));
      int out_row = 0;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const json& row = rows[r];
        if (!row.is_array() || row.size() != ts.size())
          bad(where, "each row needs one vector per component");
        for (int rep = 0; rep < repeats[r]; ++rep) {
          for (std::size_t c = 0; c < ts.size(); ++c) {
            const json& v = row[c];
            if (v.is_number()) {
              if (ts[c].dim != 1)
                bad(where, "scalar entry for a dim-" +
                               std::to_string(ts[c].dim) + " component");
              cols[c].at(out_row, 0) = v.get<float>();
            } else if (v.is_array() &&
                       static_cast<int>(v.size()) == ts[c].dim) {
              for (int i = 0; i < ts[c].dim; ++i)
                cols[c].at(out_row, i) = v[static_cast<std::size_t>(i)]
                                             .get<float>();
            } else {
              bad(where, "row entry does not match its component dim");
            }
          }
          ++out_row;
        }
      }
      reg.add(name, make_table_sampler(std::move(cols), std::move(ts)));
    } else if (kind == "mnist") {
      check_keys(d, where, {"kind", "images", "labels", "skip", "take",
                            "fields", "image_type", "label_type"});
      namespace fs = std::filesystem;
      auto anchor = [&](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? p : (fs::path(base_dir) / q).string();
      };
      MnistData data = mnist_load(anchor(need_str(d, "images", where)),
                                  anchor(need_str(d, "labels", where)));
      int skip = static_cast<int>(int_or(d, "skip", 0, where));
      int take = static_cast<int>(int_or(d, "take", -1, where));
      if (skip < 0 || skip >= data.count())
        bad(where, "'skip' is out of range");
      int n = take < 0 ? data.count() - skip : take;
      if (n < 1 || skip + n > data.count())
        bad(where, "'take' is out of range");
      std::vector<std::string> fields{"image", "label"};
      if (d.contains("fields")) {
        fields.clear();
        for (const json& f : d.at("fields")) fields.push_back(f.get<std::string>());
      }
      WireType img_t =
          d.contains("image_type")
              ? parse_wire_type(d.at("image_type"), types)
              : WireType{"mnist_img", data.rows * data.cols, WireKind::Unit};
      WireType lab_t = d.contains("label_type")
                           ? parse_wire_type(d.at("label_type"), types)
                           : WireType{"digit", 10, WireKind::OneHot};
      if (img_t.dim != data.rows * data.cols)
        bad(where, "image type dim does not match the file");
      if (lab_t.dim != data.labels.cols())
        bad(where, "label type dim does not match the file");
      std::vector<Tensor> cols;
      std::vector<WireType> ts;
      for (const std::string& f : fields) {
        if (f != "image" && f != "label")
          bad(where, "unknown field '" + f + "'");
        const Tensor& src = f == "image" ? data.images : data.labels;
        Tensor sub = Tensor::zeros(n, src.cols());
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < src.cols(); ++c)
            sub.at(r, c) = src.at(skip + r, c);
        cols.push_back(std::move(sub));
        ts.push_back(f == "image" ? img_t : lab_t);
      }
      reg.add(name, make_table_sampler(std::move(cols), std::move(ts)));
    } else if (kind == "sprites") {
      check_keys(d, where, {"kind", "size", "salt", "fields"});
      int size = static_cast<int>(int_or(d, "size", 16, where));
      std::uint64_t salt =
          static_cast<std::uint64_t>(int_or(d, "salt", 0, where));
      std::vector<SpriteField> fields;
      const json& fl = need(d, "fields", where);
      if (!fl.is_array() || fl.empty())
        bad(where, "'fields' must be a non-empty list");
      for (const json& f : fl)
        fields.push_back(parse_sprite_field(f.get<std::string>(), where));
      reg.add(name, make_sprite_sampler(size, salt, std::move(fields)));
    } else if (kind == "projection") {
      check_keys(d, where, {"kind", "of", "comps"});
      std::string base = need_str(d, "of", where);
      build(base);
      std::vector<int> comps;
      for (const json& c : need(d, "comps", where)) {
        if (!c.is_number_integer()) bad(where, "'comps' must be integers");
        comps.push_back(c.get<int>());
      }
      reg.add(name, make_projection_sampler(reg, base, std::move(comps)));
    } else if (kind == "product") {
      check_keys(d, where, {"kind", "of"});
      const json& of = need(d, "of", where);
      if (!of.is_array() || of.size() < 2)
        bad(where, "'of' must list at least two distributions");
      std::vector<std::string> parts;
      for (const json& p : of) {
        parts.push_back(p.get<std::string>());
        build(parts.back());
      }
      // Left fold; intermediate pairs get registry-internal names.
      std::string cur = parts[0];
      for (std::size_t i = 1; i + 1 < parts.size(); ++i)
        cur = reg.product(cur, parts[i]);
      reg.add(name, make_product_sampler(reg, cur, parts.back()));
    } else if (kind == "pushforward") {
      check_keys(d, where, {"kind", "of", "via"});
      reg.add(name, make_pushforward_sampler(
                        need_str(d, "of", where),
                        parse_diagram(need(d, "via", where), types)));
    } else if (kind == "stack") {
      check_keys(d, where,
                 {"kind", "item", "push", "base", "container", "max_depth"});
      reg.add(name,
              make_stack_sampler(
                  need_str(d, "item", where),
                  parse_diagram(need(d, "push", where), types),
                  need_str(d, "base", where),
                  parse_wire_type(need(d, "container", where), types),
                  static_cast<int>(int_or(d, "max_depth", 4, where))));
    } else {
      bad(where, "unknown distribution kind '" + kind + "'");
    }
    visiting.erase(name);
    done.insert(name);
  };

  for (auto it = all.begin(); it != all.end(); ++it) build(it.key());
}

// --- tasks -----------------------------------------------------------------------

struct ParsedTask {
  CompoundTask task;
  std::set<std::string> uncovered; // raw atoms still needing a divergence
};

ManipulationDists parse_manip_dists(const json& j, const std::string& where) {
  check_keys(j, where, {"labelled", "image", "image_attr", "image_attr2"});
  ManipulationDists d;
  d.labelled = str_or(j, "labelled", "", where);
  d.image = str_or(j, "image", "", where);
  d.image_attr = str_or(j, "image_attr", "", where);
  d.image_attr2 = str_or(j, "image_attr2", "", where);
  return d;
}

ManipulationOptions parse_manip_options(const json& j,
                                        const std::string& where) {
  ManipulationOptions o;
  if (j.is_null()) return o;
  check_keys(j, where,
             {"strong", "putput", "undo", "dsc", "w_classify", "w_putget",
              "w_getput", "w_putput", "w_undo", "w_gan"});
  o.strong = bool_or(j, "strong", o.strong, where);
  o.putput = bool_or(j, "putput", o.putput, where);
  o.undo = bool_or(j, "undo", o.undo, where);
  o.dsc = str_or(j, "dsc", o.dsc, where);
  o.w_classify = num_or(j, "w_classify", o.w_classify, where);
  o.w_putget = num_or(j, "w_putget", o.w_putget, where);
  o.w_getput = num_or(j, "w_getput", o.w_getput, where);
  o.w_putput = num_or(j, "w_putput", o.w_putput, where);
  o.w_undo = num_or(j, "w_undo", o.w_undo, where);
  o.w_gan = num_or(j, "w_gan", o.w_gan, where);
  return o;
}

ParsedTask parse_task(const json& j,
                      const std::map<std::string, WireType>& types);

ParsedTask parse_pattern(const json& j,
                         const std::map<std::string, WireType>& types) {
  std::string p = j.at("pattern").get<std::string>();
  const std::string where = "pattern '" + p + "'";
  auto T = [&](const char* key) {
    return parse_wire_type(need(j, key, where), types);
  };
  auto S = [&](const char* key) { return need_str(j, key, where); };
  auto div_or = [&](const char* key, Divergence dflt) {
    return j.contains(key) ? parse_divergence(j.at(key)) : dflt;
  };
  Divergence l2 = Divergence::primitive(DivKind::L2);
  Divergence bce = Divergence::primitive(DivKind::BCE);

  ParsedTask out;
  if (p == "classification") {
    check_keys(j, where, {"pattern", "prefix", "x", "y", "cls", "dist", "div",
                          "weight"});
    out.task = make_classification(T("x"), T("y"), S("cls"), S("dist"),
                                   div_or("div", l2),
                                   num_or(j, "weight", 1.0, where));
  } else if (p == "autoencoding") {
    check_keys(j, where, {"pattern", "prefix", "x", "lat", "enc", "dec",
                          "dist", "div", "weight"});
    out.task = make_autoencoding(T("x"), T("lat"), S("enc"), S("dec"),
                                 S("dist"), div_or("div", l2),
                                 num_or(j, "weight", 1.0, where));
  } else if (p == "gan") {
    check_keys(j, where, {"pattern", "prefix", "x", "code", "gen", "dsc",
                          "data_dist", "code_dist", "div", "weight"});
    out.task = make_gan(T("x"), T("code"), S("gen"), S("dsc"), S("data_dist"),
                        S("code_dist"), div_or("div", bce),
                        num_or(j, "weight", 1.0, where));
  } else if (p == "vae") {
    check_keys(j, where, {"pattern", "prefix", "x", "lat", "enc", "dec",
                          "dist", "recon_div", "recon_weight", "norm_weight"});
    out.task = make_vae(T("x"), T("lat"), S("enc"), S("dec"), S("dist"),
                        div_or("recon_div", l2),
                        num_or(j, "recon_weight", 1.0, where),
                        num_or(j, "norm_weight", 1.0, where));
  } else if (p == "cyclegan") {
    check_keys(j, where,
               {"pattern", "prefix", "x", "y", "f", "g", "dx", "dy", "x_dist",
                "y_dist", "gan_div", "cycle_div", "gan_weight",
                "cycle_weight"});
    out.task = make_cyclegan(T("x"), T("y"), S("f"), S("g"), S("dx"), S("dy"),
                             S("x_dist"), S("y_dist"), div_or("gan_div", bce),
                             div_or("cycle_div", l2),
                             num_or(j, "gan_weight", 1.0, where),
                             num_or(j, "cycle_weight", 1.0, where));
  } else if (p == "energy") {
    check_keys(j, where, {"pattern", "prefix", "x", "lat", "enc", "dec",
                          "gamma", "dist", "code_extracting", "e_enc",
                          "e_dec"});
    out.task = make_energy_min(
        T("x"), T("lat"), S("enc"), S("dec"),
        static_cast<float>(num_or(j, "gamma", 1.0, where)), S("dist"),
        bool_or(j, "code_extracting", true, where),
        str_or(j, "e_enc", "sqdist", where),
        str_or(j, "e_dec", "sqdist", where));
  } else if (p == "manipulation" || p == "strong_manipulation") {
    check_keys(j, where, {"pattern", "prefix", "x", "a", "put", "get", "dists",
                          "attr_div", "image_div", "options"});
    ManipulationOptions o = parse_manip_options(
        j.contains("options") ? j.at("options") : json(), where);
    if (p == "strong_manipulation") o.strong = true;
    out.task = make_manipulation(
        T("x"), T("a"), S("put"), S("get"),
        parse_manip_dists(need(j, "dists", where), where),
        div_or("attr_div", bce), div_or("image_div", l2), o);
  } else if (p == "complement_manipulation") {
    check_keys(j, where, {"pattern", "prefix", "x", "a", "c", "put", "get",
                          "seed", "dists", "attr_div", "image_div",
                          "options"});
    out.task = make_complement_manipulation(
        T("x"), T("a"), T("c"), S("put"), S("get"), S("seed"),
        parse_manip_dists(need(j, "dists", where), where),
        div_or("attr_div", bce), div_or("image_div", l2),
        parse_manip_options(j.contains("options") ? j.at("options") : json(),
                            where));
  } else if (p == "latent_manipulation") {
    check_keys(j, where, {"pattern", "prefix", "x", "a", "lat", "c", "spaces",
                          "style", "dists", "attr_div", "image_div",
                          "options"});
    const json& sj = need(j, "spaces", where);
    check_keys(sj, where + " spaces", {"enc", "dec", "get", "put", "seed"});
    LatentSpaces sp;
    sp.enc = need_str(sj, "enc", where);
    sp.dec = need_str(sj, "dec", where);
    sp.get = need_str(sj, "get", where);
    sp.put = need_str(sj, "put", where);
    sp.seed = str_or(sj, "seed", "", where);
    WireType c{"", 0, WireKind::Real};
    if (j.contains("c")) c = parse_wire_type(j.at("c"), types);
    std::string style = str_or(j, "style", "latent_net", where);
    PutStyle ps;
    if (style == "linear_offset") ps = PutStyle::LinearOffset;
    else if (style == "latent_net") ps = PutStyle::LatentNet;
    else bad(where, "unknown style '" + style + "'");
    out.task = make_latent_manipulation(
        T("x"), T("a"), T("lat"), c, sp, ps,
        parse_manip_dists(need(j, "dists", where), where),
        div_or("attr_div", bce), div_or("image_div", l2),
        parse_manip_options(j.contains("options") ? j.at("options") : json(),
                            where));
  } else if (p == "stack") {
    check_keys(j, where, {"pattern", "prefix", "s", "x", "psh", "pop", "bot",
                          "dist", "div", "w_pshpop", "w_empty"});
    out.task = make_stack(T("s"), T("x"), S("psh"), S("pop"), S("bot"),
                          S("dist"), div_or("div", l2),
                          num_or(j, "w_pshpop", 1.0, where),
                          num_or(j, "w_empty", 1.0, where));
  } else {
    bad(where, "unknown pattern");
  }
  return out;
}

ParsedTask parse_task(const json& j,
                      const std::map<std::string, WireType>& types) {
  const std::string where = "task";
  if (!j.is_object()) bad(where, "expected an object");
  ParsedTask out;

  if (j.contains("pattern")) {
    out = parse_pattern(j, types);
  } else if (j.contains("atoms")) {
    check_keys(j, where, {"atoms", "name", "prefix"});
    out.task.name = str_or(j, "name", "task", where);
    for (const json& a : j.at("atoms")) {
      const std::string aw = where + " atom";
      check_keys(a, aw,
                 {"name", "sys", "spec", "dist", "trainable", "div", "weight"});
      std::string name = need_str(a, "name", aw);
      std::set<std::string> trainable;
      if (a.contains("trainable"))
        for (const json& t : a.at("trainable"))
          trainable.insert(t.get<std::string>());
      Divergence div = Divergence::primitive(DivKind::L2);
      if (a.contains("div")) div = parse_divergence(a.at("div"));
      else out.uncovered.insert(name);
      out.task.atoms.push_back(make_atom(
          name, parse_diagram(need(a, "sys", aw), types),
          parse_diagram(need(a, "spec", aw), types), str_or(a, "dist", "", aw),
          std::move(trainable), std::move(div),
          num_or(a, "weight", 1.0, aw)));
    }
    validate_task(out.task);
  } else if (j.contains("combine")) {
    check_keys(j, where, {"combine", "name", "prefix"});
    std::vector<CompoundTask> parts;
    for (const json& p : j.at("combine")) {
      ParsedTask sub = parse_task(p, types);
      out.uncovered.insert(sub.uncovered.begin(), sub.uncovered.end());
      parts.push_back(std::move(sub.task));
    }
    out.task = combine(str_or(j, "name", "combined", where), parts);
  } else if (j.contains("specialise")) {
    check_keys(j, where, {"specialise", "space", "impl", "prefix"});
    ParsedTask sub = parse_task(j.at("specialise"), types);
    out.uncovered = std::move(sub.uncovered);
    out.task = specialise(sub.task, need_str(j, "space", where),
                          parse_diagram(need(j, "impl", where), types));
  } else {
    bad(where, "expected 'pattern', 'atoms', 'combine' or 'specialise'");
  }

  std::string prefix = str_or(j, "prefix", "", where);
  if (!prefix.empty()) {
    out.task = with_prefix(std::move(out.task), prefix);
    std::set<std::string> renamed;
    for (const std::string& n : out.uncovered) renamed.insert(prefix + n);
    out.uncovered = std::move(renamed);
  }
  return out;
}

// --- objective overrides -----------------------------------------------------

void apply_objective(const json& j, ParsedTask& pt, ObjectiveOptions& opts) {
  const std::string where = "objective";
  if (!j.is_null()) {
    check_keys(j, where, {"divergences", "weights", "excluded", "alternating",
                          "entropy_bonus"});
    if (j.contains("divergences"))
      for (auto it = j.at("divergences").begin();
           it != j.at("divergences").end(); ++it) {
        if (!pt.task.has_atom(it.key()))
          fail("UnknownAtom", "objective divergence names unknown atom '" +
                                  it.key() + "'");
        for (AtomicTask& a : pt.task.atoms)
          if (a.name == it.key()) a.div = parse_divergence(it.value());
        pt.uncovered.erase(it.key());
      }
    if (j.contains("weights"))
      for (auto it = j.at("weights").begin(); it != j.at("weights").end();
           ++it) {
        if (!pt.task.has_atom(it.key()))
          fail("UnknownAtom",
               "objective weight names unknown atom '" + it.key() + "'");
        if (!it.value().is_number() || !(it.value().get<double>() > 0.0))
          fail("NonPositiveWeight",
               "weight for atom '" + it.key() + "' must be positive");
        for (AtomicTask& a : pt.task.atoms)
          if (a.name == it.key()) a.weight = it.value().get<double>();
      }
    if (j.contains("excluded")) {
      for (const json& s : j.at("excluded"))
        pt.task.excluded.insert(s.get<std::string>());
      validate_task(pt.task);
    }
    if (j.contains("alternating"))
      for (const json& g : j.at("alternating")) {
        std::vector<std::string> group;
        for (const json& n : g) group.push_back(n.get<std::string>());
        opts.alternating.push_back(std::move(group));
      }
    if (j.contains("entropy_bonus"))
      for (auto it = j.at("entropy_bonus").begin();
           it != j.at("entropy_bonus").end(); ++it)
        opts.entropy_bonus[it.key()] = it.value().get<float>();
  }
  if (!pt.uncovered.empty())
    fail("UncoveredAtom", "atom '" + *pt.uncovered.begin() +
                              "' has no divergence (give it one inline or in "
                              "objective.divergences)");
}

RunConfig parse_run(const json& j) {
  const std::string where = "train";
  RunConfig r;
  if (j.is_null()) return r;
  check_keys(j, where,
             {"steps", "batch", "seed", "log_every", "lr", "beta1", "beta2",
              "eps", "weight_decay", "clip", "out", "init_from"});
  r.steps = int_or(j, "steps", r.steps, where);
  r.batch = static_cast<int>(int_or(j, "batch", r.batch, where));
  r.seed = static_cast<std::uint64_t>(int_or(j, "seed", 0, where));
  r.log_every = static_cast<int>(int_or(j, "log_every", r.log_every, where));
  r.optim.lr = num_or(j, "lr", r.optim.lr, where);
  r.optim.beta1 = num_or(j, "beta1", r.optim.beta1, where);
  r.optim.beta2 = num_or(j, "beta2", r.optim.beta2, where);
  r.optim.eps = num_or(j, "eps", r.optim.eps, where);
  r.optim.weight_decay = num_or(j, "weight_decay", r.optim.weight_decay, where);
  r.optim.clip = num_or(j, "clip", r.optim.clip, where);
  r.out_dir = str_or(j, "out", "", where);
  r.init_from = str_or(j, "init_from", "", where);
  return r;
}

} // namespace

TaskBundle parse_task_bundle(const json& j, const std::string& base_dir) {
  const std::string where = "task spec";
  check_keys(j, where,
             {"name", "types", "layouts", "distributions", "task", "drop",
              "freeze", "objective", "train", "eval", "stack_eval"});
  TaskBundle b;
  b.name = str_or(j, "name", "task", where);

  if (j.contains("types")) {
    if (!j.at("types").is_object()) bad("types", "expected an object");
    for (auto it = j.at("types").begin(); it != j.at("types").end(); ++it)
      b.types.emplace(it.key(), parse_wire_type(it.value(), b.types));
  }
  if (j.contains("layouts")) {
    if (!j.at("layouts").is_object()) bad("layouts", "expected an object");
    for (auto it = j.at("layouts").begin(); it != j.at("layouts").end(); ++it)
      b.layouts.emplace(it.key(), parse_layout(it.value()));
  }
  if (j.contains("distributions"))
    build_distributions(j.at("distributions"), b.types, base_dir, b.dists);

  ParsedTask pt = parse_task(need(j, "task", where), b.types);

  if (j.contains("drop")) {
    for (const json& n : j.at("drop")) {
      std::string name = n.get<std::string>();
      if (!pt.task.has_atom(name))
        fail("UnknownAtom", "drop names unknown atom '" + name + "'");
      auto& atoms = pt.task.atoms;
      for (auto it = atoms.begin(); it != atoms.end(); ++it)
        if (it->name == name) {
          atoms.erase(it);
          break;
        }
      pt.uncovered.erase(name);
    }
    validate_task(pt.task);
  }
  if (j.contains("freeze")) {
    std::set<std::string> spaces = task_spaces(pt.task);
    for (const json& n : j.at("freeze")) {
      std::string space = n.get<std::string>();
      if (!spaces.count(space))
        fail("UnknownSpace", "freeze names unknown space '" + space + "'");
      for (AtomicTask& a : pt.task.atoms) a.trainable.erase(space);
    }
  }

  apply_objective(j.contains("objective") ? j.at("objective") : json(), pt,
                  b.objective);
  b.task = std::move(pt.task);
  b.run = parse_run(j.contains("train") ? j.at("train") : json());

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    const std::string ew = "eval";
    check_keys(e, ew, {"batch", "seed", "dists"});
    b.eval_batch = static_cast<int>(int_or(e, "batch", b.eval_batch, ew));
    b.eval_seed = static_cast<std::uint64_t>(
        int_or(e, "seed", static_cast<std::int64_t>(b.eval_seed), ew));
    if (e.contains("dists"))
      for (auto it = e.at("dists").begin(); it != e.at("dists").end(); ++it)
        b.eval_dists[it.key()] = it.value().get<std::string>();
  }
  if (j.contains("stack_eval")) {
    const json& s = j.at("stack_eval");
    const std::string sw = "stack_eval";
    check_keys(s, sw, {"enc", "dec", "psh", "pop", "bot", "images"});
    b.has_stack_eval = true;
    b.stack.enc = need_str(s, "enc", sw);
    b.stack.dec = need_str(s, "dec", sw);
    b.stack.psh = need_str(s, "psh", sw);
    b.stack.pop = need_str(s, "pop", sw);
    b.stack.bot = need_str(s, "bot", sw);
    b.stack.image_dist = need_str(s, "images", sw);
  }
  return b;
}

TaskBundle load_task_bundle(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail("BadSpec", path + ": " + e.what());
  }
  try {
    return parse_task_bundle(
        j, std::filesystem::path(path).parent_path().string());
  } catch (const json::exception& e) {
    fail("BadSpec", path + ": " + e.what());
  }
}

// --- proof scripts ----------------------------------------------------------------

namespace {

EquationSet parse_equations(const json& j,
                            const std::map<std::string, WireType>& types) {
  if (j.is_object()) return equations_of(parse_task(j, types).task);
  const std::string where = "equations";
  if (!j.is_array()) bad(where, "expected a task object or a list");
  std::vector<TaskEquation> eqs;
  for (const json& e : j) {
    check_keys(e, where, {"name", "lhs", "rhs", "dist", "trainable"});
    TaskEquation q;
    q.name = str_or(e, "name", "eq" + std::to_string(eqs.size()), where);
    q.lhs = parse_diagram(need(e, "lhs", where), types);
    q.rhs = parse_diagram(need(e, "rhs", where), types);
    q.dist = str_or(e, "dist", "", where);
    if (e.contains("trainable"))
      for (const json& t : e.at("trainable"))
        q.trainable.insert(t.get<std::string>());
    eqs.push_back(std::move(q));
  }
  return EquationSet(std::move(eqs));
}

} // namespace

ProofScript parse_proof_script(const json& j, const std::string& base_dir) {
  (void)base_dir;
  const std::string where = "proof script";
  check_keys(j, where, {"name", "types", "source", "target", "steps"});
  std::map<std::string, WireType> types;
  if (j.contains("types"))
    for (auto it = j.at("types").begin(); it != j.at("types").end(); ++it)
      types.emplace(it.key(), parse_wire_type(it.value(), types));

  ProofScript s;
  s.name = str_or(j, "name", "proof", where);
  s.source = parse_equations(need(j, "source", where), types);
  s.target = parse_equations(need(j, "target", where), types);
  for (const json& st : need(j, "steps", where)) {
    const std::string sw = where + " step";
    check_keys(st, sw, {"rule", "backward", "eq", "site", "on_rhs", "eq2",
                        "w1", "w2", "fn", "post"});
    ProofStep p;
    p.rule = need_str(st, "rule", sw);
    if (p.rule != "copy_through" && p.rule != "lincomb_split" &&
        p.rule != "positivity_collapse" && p.rule != "postcompose")
      bad(sw, "unknown rule '" + p.rule + "'");
    p.backward = bool_or(st, "backward", false, sw);
    p.eq = static_cast<int>(int_or(st, "eq", 0, sw));
    p.site = str_or(st, "site", "", sw);
    p.on_rhs = bool_or(st, "on_rhs", false, sw);
    p.eq2 = static_cast<int>(int_or(st, "eq2", -1, sw));
    p.w1 = static_cast<float>(num_or(st, "w1", 1.0, sw));
    p.w2 = static_cast<float>(num_or(st, "w2", 1.0, sw));
    p.fn = str_or(st, "fn", "sqdist", sw);
    if (st.contains("post")) p.post = parse_diagram(st.at("post"), types);
    s.steps.push_back(std::move(p));
  }
  return s;
}

ProofScript load_proof_script(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail("BadSpec", path + ": " + e.what());
  }
  try {
    return parse_proof_script(
        j, std::filesystem::path(path).parent_path().string());
  } catch (const json::exception& e) {
    fail("BadSpec", path + ": " + e.what());
  }
}

} // namespace taskforge
