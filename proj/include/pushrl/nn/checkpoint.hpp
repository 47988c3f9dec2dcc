#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/nn/mlp.hpp"

namespace pushrl::nn {

/// Checkpoint file:
///   8 bytes   magic "PUSHRLCK"
///   8 bytes   header length L, little-endian uint64
///   L bytes   JSON header {schema_version, networks: [{name, dims,
///             activation, offset, count}], meta: {...}}
///   rest      float64 little-endian parameter blob
/// Doubles inside the JSON header are written with round-trip precision, so a
/// save/load cycle is bit-exact for both the blob and the metadata.
struct Checkpoint {
    static constexpr int kSchemaVersion = 1;
    static constexpr char kMagic[9] = "PUSHRLCK";

    std::vector<std::pair<std::string, Mlp>> networks;
    nlohmann::json meta = nlohmann::json::object();

    const Mlp& network(const std::string& name) const {
        for (const auto& [n, m] : networks)
            if (n == name) return m;
        throw Error("checkpoint has no network '" + name + "'");
    }

    void save(const std::string& path) const {
        nlohmann::json header;
        header["schema_version"] = kSchemaVersion;
        header["networks"] = nlohmann::json::array();
        std::uint64_t offset = 0;
        for (const auto& [name, m] : networks) {
            header["networks"].push_back({{"name", name},
                                          {"dims", m.dims()},
                                          {"activation", to_string(m.activation())},
                                          {"offset", offset},
                                          {"count", m.num_params()}});
            offset += m.num_params();
        }
        header["meta"] = meta;
        const std::string text = header.dump();

        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint '" + path + "'");
        out.write(kMagic, 8);
        write_u64(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, m] : networks)
            for (double v : m.params()) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                write_u64(out, bits);
            }
        if (!out) throw IoError("short write on checkpoint '" + path + "'");
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open checkpoint '" + path + "'");
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("'" + path + "' is not a pushrl checkpoint");
        const std::uint64_t len = read_u64(in);
        std::string text(len, '\0');
        in.read(text.data(), static_cast<std::streamsize>(len));
        if (!in) throw IoError("truncated checkpoint header in '" + path + "'");
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt checkpoint header in '" + path + "': " + e.what());
        }
        if (header.value("schema_version", 0) != kSchemaVersion)
            throw IoError("unsupported checkpoint schema in '" + path + "'");

        Checkpoint ck;
        ck.meta = header.value("meta", nlohmann::json::object());
        for (const auto& n : header.at("networks")) {
            Mlp m(n.at("dims").get<std::vector<std::size_t>>(), activation_from_string(n.at("activation")));
            if (m.num_params() != n.at("count").get<std::size_t>())
                throw IoError("checkpoint '" + path + "': parameter count does not match dims");
            for (double& v : m.params()) {
                const std::uint64_t bits = read_u64(in);
                std::memcpy(&v, &bits, sizeof v);
            }
            if (!in) throw IoError("truncated parameter blob in '" + path + "'");
            ck.networks.emplace_back(n.at("name").get<std::string>(), std::move(m));
        }
        return ck;
    }

private:
    static void write_u64(std::ostream& out, std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }

    static std::uint64_t read_u64(std::istream& in) {
        unsigned char b[8] = {};
        in.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
};

}  // namespace pushrl::nn
