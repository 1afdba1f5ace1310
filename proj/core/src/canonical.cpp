#include "taskforge/canonical.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace taskforge {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

std::string float_key(float v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", double(v));
  return buf;
}

// Identity-free description of a box: everything except its name.
std::string attr_key(const Box& b) {
  std::string s = boxkind_to_string(b.kind);
  s += "|p=" + b.param + "|f=" + b.fn + "|d=" + b.dist + "|a=";
  for (float v : b.args) s += float_key(v) + ",";
  s += "|v=";
  for (float v : b.value) s += float_key(v) + ",";
  s += "|i=";
  for (const WireType& t : b.ins) s += t.to_string() + ",";
  s += "|o=";
  for (const WireType& t : b.outs) s += t.to_string() + ",";
  return s;
}

} // namespace

std::string canonical_form(const Diagram& d) {
  const int n = int(d.nodes.size());
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[d.nodes[i].id] = i;

  Wiring w(d);
  std::vector<int> topo = topo_order(d);

  std::vector<std::string> attrs(n);
  for (int i = 0; i < n; ++i) attrs[i] = attr_key(d.nodes[i]);

  // Longest-path layering; every edge strictly increases the layer.
  std::vector<int> layer(n, 0);
  for (int i : topo) {
    const Box& b = d.nodes[i];
    for (int p = 0; p < int(b.ins.size()); ++p) {
      PortRef src = w.producer(PortRef{b.id, p});
      if (src.node != kIn)
        layer[i] = std::max(layer[i], layer[index.at(src.node)] + 1);
    }
  }

  // Forward context hash: full upstream unfolding including port positions.
  std::vector<std::uint64_t> fh(n, 0);
  for (int i : topo) {
    const Box& b = d.nodes[i];
    std::string key = attrs[i];
    for (int p = 0; p < int(b.ins.size()); ++p) {
      PortRef src = w.producer(PortRef{b.id, p});
      key += src.node == kIn ? "<I" + std::to_string(src.port)
                             : "<" + hex64(fh[index.at(src.node)]);
      key += ":" + std::to_string(src.port);
    }
    fh[i] = fnv1a(key);
  }

  // Backward context hash: downstream unfolding.
  std::vector<std::uint64_t> bh(n, 0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    int i = *it;
    const Box& b = d.nodes[i];
    std::string key = attrs[i];
    for (int p = 0; p < int(b.outs.size()); ++p) {
      PortRef dst = w.consumer(PortRef{b.id, p});
      key += dst.node == kOut ? ">O" + std::to_string(dst.port)
                              : ">" + hex64(bh[index.at(dst.node)]);
      key += ":" + std::to_string(dst.port);
    }
    bh[i] = fnv1a(key);
  }

  // Canonical id assignment: layers in order; within a layer nodes sort by
  // (attr, fh, bh, provenance in already-assigned canonical ids). Wire
  // linearity makes provenance a total discriminator for nodes with inputs.
  std::vector<std::vector<int>> by_layer;
  for (int i = 0; i < n; ++i) {
    if (int(by_layer.size()) <= layer[i]) by_layer.resize(layer[i] + 1);
    by_layer[layer[i]].push_back(i);
  }

  std::vector<int> cid(n, -1);
  int next_cid = 0;
  for (auto& group : by_layer) {
    struct Key {
      std::string k;
      int node;
    };
    std::vector<Key> keys;
    keys.reserve(group.size());
    for (int i : group) {
      const Box& b = d.nodes[i];
      std::string k = attrs[i] + "#" + hex64(fh[i]) + "#" + hex64(bh[i]) + "#";
      for (int p = 0; p < int(b.ins.size()); ++p) {
        PortRef src = w.producer(PortRef{b.id, p});
        k += src.node == kIn
                 ? "i" + std::to_string(src.port)
                 : "c" + std::to_string(cid[index.at(src.node)]);
        k += "." + std::to_string(src.port) + ";";
      }
      keys.push_back({std::move(k), i});
    }
    std::sort(keys.begin(), keys.end(),
              [](const Key& a, const Key& b) { return a.k < b.k; });
    for (const Key& k : keys) cid[k.node] = next_cid++;
  }

  // Serialise: interfaces, nodes in canonical order, sorted edge list.
  std::string out = "in[";
  for (const WireType& t : d.inputs) out += t.to_string() + ";";
  out += "]out[";
  for (const WireType& t : d.outputs) out += t.to_string() + ";";
  out += "]nodes[";
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[cid[i]] = i;
  for (int c = 0; c < n; ++c) out += std::to_string(c) + "=" + attrs[order[c]] + ";";
  out += "]edges[";
  std::vector<std::string> es;
  es.reserve(d.edges.size());
  for (const Edge& e : d.edges) {
    std::string from = e.from == kIn ? "I" : std::to_string(cid[index.at(e.from)]);
    std::string to = e.to == kOut ? "O" : std::to_string(cid[index.at(e.to)]);
    es.push_back(from + "." + std::to_string(e.from_port) + ">" + to + "." +
                 std::to_string(e.to_port));
  }
  std::sort(es.begin(), es.end());
  for (const std::string& e : es) out += e + ";";
  out += "]";
  return out;
}

std::uint64_t canonical_hash(const Diagram& d) {
  return fnv1a(canonical_form(d));
}

} // namespace taskforge
