#include "strat/store.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "strat/errors.hpp"

// Blocks are raw little-endian memory images; on a big-endian target the
// format would need byte swaps that nothing here performs.
static_assert(std::endian::native == std::endian::little);

namespace strat {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "STRATREC1 ";

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

[[noreturn]] void corrupt(const std::string& origin, const std::string& why) {
  throw std::runtime_error("corrupt record (" + origin + "): " + why);
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash_hex(const std::string& path) { return hash_hex(fnv1a64(read_file_bytes(path))); }

std::int64_t Record::meta_int(const std::string& key) const {
  const std::string& v = meta_str(key);
  std::size_t pos = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw std::runtime_error("record meta '" + key + "' is not an integer: '" + v + "'");
  return out;
}

double Record::meta_double(const std::string& key) const {
  const std::string& v = meta_str(key);
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw std::runtime_error("record meta '" + key + "' is not a number: '" + v + "'");
  return out;
}

const std::string& Record::meta_str(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("record meta missing: " + key);
  return it->second;
}

const std::vector<double>& Record::get_f64(const std::string& name) const {
  const auto it = f64.find(name);
  if (it == f64.end()) throw std::runtime_error("record block missing: " + name + " (f64)");
  return it->second;
}

const std::vector<std::int64_t>& Record::get_i64(const std::string& name) const {
  const auto it = i64.find(name);
  if (it == i64.end()) throw std::runtime_error("record block missing: " + name + " (i64)");
  return it->second;
}

const std::vector<std::uint8_t>& Record::get_u8(const std::string& name) const {
  const auto it = u8.find(name);
  if (it == u8.end()) throw std::runtime_error("record block missing: " + name + " (u8)");
  return it->second;
}

std::string encode_record(const Record& rec) {
  json blocks = json::array();
  std::string payload;
  const auto append = [&](const char* kind, const std::string& name, const void* data, std::size_t count,
                          std::size_t elem_size) {
    blocks.push_back(json{{"count", count}, {"kind", kind}, {"name", name}});
    if (count > 0) payload.append(static_cast<const char*>(data), count * elem_size);
  };
  for (const auto& [name, v] : rec.f64) append("f64", name, v.data(), v.size(), sizeof(double));
  for (const auto& [name, v] : rec.i64) append("i64", name, v.data(), v.size(), sizeof(std::int64_t));
  for (const auto& [name, v] : rec.u8) append("u8", name, v.data(), v.size(), 1);

  const json header{{"blocks", blocks}, {"config", rec.config_hash}, {"meta", rec.meta},
                    {"parents", rec.parents}, {"stage", rec.stage}};
  std::string out{kMagic};
  out += header.dump();
  out += '\n';
  out += payload;
  return out;
}

Record decode_record(std::string_view bytes, const std::string& origin) {
  if (bytes.substr(0, kMagic.size()) != kMagic) corrupt(origin, "bad magic");
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) corrupt(origin, "missing header terminator");

  json header;
  try {
    header = json::parse(bytes.substr(kMagic.size(), nl - kMagic.size()));
  } catch (const json::exception& e) {
    corrupt(origin, std::string("header is not valid JSON: ") + e.what());
  }

  Record rec;
  try {
    rec.stage = header.at("stage").get<std::string>();
    rec.config_hash = header.at("config").get<std::string>();
    rec.parents = header.at("parents").get<std::map<std::string, std::string>>();
    rec.meta = header.at("meta").get<std::map<std::string, std::string>>();

    std::string_view payload = bytes.substr(nl + 1);
    std::size_t offset = 0;
    const auto take = [&](std::size_t nbytes) {
      if (offset + nbytes > payload.size()) corrupt(origin, "payload shorter than the header promises");
      const char* p = payload.data() + offset;
      offset += nbytes;
      return p;
    };
    for (const auto& b : header.at("blocks")) {
      const auto name = b.at("name").get<std::string>();
      const auto kind = b.at("kind").get<std::string>();
      const auto count = b.at("count").get<std::uint64_t>();
      if (kind == "f64") {
        auto& v = rec.f64[name];
        v.resize(count);
        if (count) std::memcpy(v.data(), take(count * sizeof(double)), count * sizeof(double));
      } else if (kind == "i64") {
        auto& v = rec.i64[name];
        v.resize(count);
        if (count) std::memcpy(v.data(), take(count * sizeof(std::int64_t)), count * sizeof(std::int64_t));
      } else if (kind == "u8") {
        auto& v = rec.u8[name];
        v.resize(count);
        if (count) std::memcpy(v.data(), take(count), count);
      } else {
        corrupt(origin, "unknown block kind '" + kind + "'");
      }
    }
    if (offset != payload.size()) corrupt(origin, "payload longer than the header promises");
  } catch (const json::exception& e) {
    corrupt(origin, std::string("malformed header field: ") + e.what());
  }
  return rec;
}

void write_record(const std::string& path, const Record& rec) {
  const std::string bytes = encode_record(rec);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move " + tmp + " into place");
  }
}

Record load_record(const std::string& path, const std::string& expected_stage) {
  std::string bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::exception&) {
    throw stage_order_error("no " + expected_stage + " record at " + path + "; run 'strat " + expected_stage +
                            "' first");
  }
  Record rec;
  try {
    rec = decode_record(bytes, path);
  } catch (const std::exception& e) {
    throw stage_order_error(e.what());
  }
  if (rec.stage != expected_stage)
    throw stage_order_error(path + " holds a '" + rec.stage + "' record where '" + expected_stage +
                            "' was expected");
  return rec;
}

}  // namespace strat
