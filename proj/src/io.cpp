#include "fluctsim/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fluctsim/state.hpp"

namespace fluctsim {

const char* fluctsim_version() { return "fluctsim 1.0.0"; }

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_manifest_json(std::ostream& os, const RunManifest& m) {
    nlohmann::json j;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    j["base_seed"] = m.base_seed;
    j["run_seeds"] = m.run_seeds;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : m.files)
        files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a64", f.sha}});
    j["files"] = files;
    os << j.dump(2) << "\n";
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("short write to " + path);
}

ManifestFile inventory_file(const std::string& dir, const std::string& name) {
    std::string text = read_text_file(dir + "/" + name);
    return {name, text.size(), hash_hex(fnv1a64(text))};
}

// Snapshot format: one JSON header object, then one object per particle,
// newline separated. nlohmann emits shortest round-trip doubles, so a
// write/read cycle is exact.
void write_snapshot(std::ostream& os, const SystemState& s) {
    const int d = s.dom.d;
    nlohmann::json head;
    head["d"] = d;
    head["eps"] = s.dom.eps;
    head["n"] = s.n();
    head["time"] = s.time;
    os << head.dump() << "\n";
    for (const auto& p : s.particles) {
        nlohmann::json row;
        nlohmann::json x = nlohmann::json::array(), v = nlohmann::json::array();
        for (int i = 0; i < d; ++i) {
            x.push_back(p.x[i]);
            v.push_back(p.v[i]);
        }
        row["x"] = std::move(x);
        row["v"] = std::move(v);
        os << row.dump() << "\n";
    }
}

SystemState read_snapshot(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_snapshot: missing header");
    nlohmann::json head = nlohmann::json::parse(line);
    SystemState s;
    s.dom = DomainParams(head.at("d").get<int>(), head.at("eps").get<double>());
    s.time = head.at("time").get<double>();
    int n = head.at("n").get<int>();
    if (n < 0) throw std::runtime_error("read_snapshot: negative particle count");
    s.particles.reserve(std::size_t(n));
    for (int r = 0; r < n; ++r) {
        if (!std::getline(is, line))
            throw std::runtime_error("read_snapshot: truncated after " + std::to_string(r) +
                                     " of " + std::to_string(n) + " rows");
        nlohmann::json row = nlohmann::json::parse(line);
        Particle p;
        for (int i = 0; i < s.dom.d; ++i) {
            p.x[i] = row.at("x").at(std::size_t(i)).get<double>();
            p.v[i] = row.at("v").at(std::size_t(i)).get<double>();
        }
        s.particles.push_back(p);
    }
    return s;
}

}  // namespace fluctsim
