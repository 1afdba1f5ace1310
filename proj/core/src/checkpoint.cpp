#include "taskforge/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "taskforge/errors.hpp"

namespace taskforge {

namespace {

using nlohmann::json;

std::string act_name(Act a) { return act_to_string(a); }
Act act_from(const std::string& s) { return act_from_string(s); }

void append_le32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

} // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& c) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail("IoError", "cannot create '" + dir + "': " + ec.message());

  json spaces = json::array();
  std::string blob;
  std::size_t offset = 0;
  for (auto& name : c.params.spaces()) {
    const ParamLayout& layout = c.params.layout(name);
    const Tensor& flat = c.params.flat(name);
    if (!flat.all_finite())
      fail("NonFinite", "space '" + name + "' holds a NaN/Inf value");
    json entry;
    entry["name"] = name;
    if (auto* mlp = std::get_if<MlpLayout>(&layout)) {
      entry["kind"] = "mlp";
      entry["dims"] = mlp->dims;
      json acts = json::array();
      for (Act a : mlp->acts) acts.push_back(act_name(a));
      entry["acts"] = std::move(acts);
    } else {
      entry["kind"] = "vector";
      entry["n"] = std::get<VectorLayout>(layout).n;
    }
    entry["offset"] = offset;
    entry["count"] = flat.size();
    spaces.push_back(std::move(entry));
    for (std::size_t i = 0; i < flat.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, flat.data() + i, 4);
      append_le32(blob, bits);
    }
    offset += flat.size();
  }

  json manifest;
  manifest["format"] = "taskforge-checkpoint-v1";
  manifest["seed"] = c.seed;
  manifest["step"] = c.step;
  manifest["spaces"] = std::move(spaces);

  {
    std::ofstream f(dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    if (!f) fail("IoError", "cannot write '" + dir + "/manifest.json'");
    f << manifest.dump(2) << "\n";
  }
  {
    std::ofstream f(dir + "/params.bin", std::ios::binary | std::ios::trunc);
    if (!f) fail("IoError", "cannot write '" + dir + "/params.bin'");
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) fail("IoError", "cannot open '" + dir + "/manifest.json'");
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    fail("BadManifest", e.what());
  }
  if (manifest.value("format", "") != "taskforge-checkpoint-v1")
    fail("BadManifest", "unknown checkpoint format");

  std::ifstream bf(dir + "/params.bin", std::ios::binary);
  if (!bf) fail("IoError", "cannot open '" + dir + "/params.bin'");
  std::vector<unsigned char> blob(std::istreambuf_iterator<char>(bf),
                                  std::istreambuf_iterator<char>{});

  Checkpoint c;
  try {
    c.seed = manifest.at("seed").get<std::uint64_t>();
    c.step = manifest.at("step").get<std::int64_t>();
    for (auto& entry : manifest.at("spaces")) {
      std::string name = entry.at("name").get<std::string>();
      ParamLayout layout;
      if (entry.at("kind") == "mlp") {
        MlpLayout mlp;
        mlp.dims = entry.at("dims").get<std::vector<int>>();
        for (auto& a : entry.at("acts"))
          mlp.acts.push_back(act_from(a.get<std::string>()));
        if (mlp.dims.size() < 2 || mlp.acts.size() != mlp.dims.size() - 1)
          fail("BadManifest", "space '" + name + "' has a malformed layout");
        layout = std::move(mlp);
      } else if (entry.at("kind") == "vector") {
        layout = VectorLayout{entry.at("n").get<int>()};
      } else {
        fail("BadManifest", "space '" + name + "' has an unknown kind");
      }
      std::size_t offset = entry.at("offset").get<std::size_t>();
      std::size_t count = entry.at("count").get<std::size_t>();
      if (count != layout_param_count(layout))
        fail("BadManifest", "space '" + name + "' count does not match its layout");
      if ((offset + count) * 4 > blob.size())
        fail("TruncatedFile", "params.bin is shorter than the manifest claims");

      c.params.declare(name, layout);
      Tensor& flat = c.params.flat(name);
      for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = read_le32(blob.data() + (offset + i) * 4);
        std::memcpy(flat.data() + i, &bits, 4);
      }
      if (!flat.all_finite())
        fail("NonFinite", "space '" + name + "' holds a NaN/Inf value");
    }
  } catch (const json::exception& e) {
    fail("BadManifest", e.what());
  }
  return c;
}

bool params_identical(const ParamStore& a, const ParamStore& b) {
  if (a.spaces() != b.spaces()) return false;
  for (auto& name : a.spaces()) {
    const Tensor& ta = a.flat(name);
    const Tensor& tb = b.flat(name);
    if (ta.size() != tb.size()) return false;
    if (std::memcmp(ta.data(), tb.data(), ta.size() * 4) != 0) return false;
  }
  return true;
}

} // namespace taskforge
