// SPDX-License-Identifier: Apache-2.0
//
// mpcc - multi-link multipath cluster identification and characterization
// Copyright (C) 2026 The mpcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MPCC_IO_HPP
#define MPCC_IO_HPP

#include "mpcc/core.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mpcc
{

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// Text helpers

// Shortest round-trip representation; non-finite values become null in JSON
inline std::string num(double x) { return std::isfinite(x) ? fmt::format("{}", x) : std::string("null"); }

// Same for CSV cells, where non-finite values are written as nan / inf
inline std::string cell(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return fmt::format("{}", x);
}

inline std::string vec_json(const Vec3 &v) { return fmt::format("[{},{},{}]", num(v.x()), num(v.y()), num(v.z())); }

inline std::string quoted(std::string_view s) { return Json(std::string(s)).dump(); }

[[noreturn]] inline void data_error(const fs::path &file, std::size_t line, const std::string &msg)
{
    throw Error(ErrorCode::data, fmt::format("{}:{}: {}", file.string(), line, msg));
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double &out)
{
    const auto *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

inline bool parse_int(std::string_view s, int &out)
{
    const auto *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

inline std::ifstream open_input(const fs::path &file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::data, fmt::format("cannot open input file '{}'", file.string()));
    return in;
}

// Writes atomically enough for a single writer: content goes to the final path in one call
inline void write_text(const fs::path &file, const std::string &content)
{
    if (file.has_parent_path())
        fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::data, fmt::format("cannot write '{}'", file.string()));
    out << content;
    if (!out)
        throw Error(ErrorCode::data, fmt::format("write failed for '{}'", file.string()));
}

inline std::string read_text(const fs::path &file)
{
    auto in = open_input(file);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_file(const fs::path &file)
{
    const std::string data = read_text(file);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::data, "sha256 failed for " + file.string());
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", md[i]);
    return hex;
}

// Rows of a comma-separated file. The first row is treated as a header when its first cell is not
// numeric; `expected` then names the required columns in order.
struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line; // source line per row
};

inline CsvTable read_numeric_csv(const fs::path &file, const std::vector<std::string> &expected)
{
    auto in = open_input(file);
    CsvTable t;
    std::string s;
    std::size_t ln = 0;
    bool first = true;
    while (std::getline(in, s))
    {
        ++ln;
        const auto line = trim(s);
        if (line.empty() || line.front() == '#')
            continue;
        auto cells = split(line, ',');
        double probe = 0.0;
        if (first && !parse_double(cells[0], probe))
        {
            first = false;
            for (auto c : cells)
                t.header.emplace_back(c);
            if (!expected.empty())
            {
                if (t.header.size() < expected.size())
                    data_error(file, ln, fmt::format("header has {} columns, expected {}", t.header.size(),
                                                     fmt::join(expected, ",")));
                for (std::size_t i = 0; i < expected.size(); ++i)
                    if (t.header[i] != expected[i])
                        data_error(file, ln, fmt::format("column {} is '{}', expected '{}'", i + 1, t.header[i],
                                                         expected[i]));
            }
            continue;
        }
        first = false;
        if (!expected.empty() && cells.size() != std::max(expected.size(), t.header.size()))
            data_error(file, ln, fmt::format("expected {} values, found {}", expected.size(), cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (!parse_double(cells[i], row[i]) || !std::isfinite(row[i]))
                data_error(file, ln, fmt::format("column {}: '{}' is not a finite number", i + 1, cells[i]));
        t.rows.push_back(std::move(row));
        t.line.push_back(ln);
    }
    return t;
}

inline int as_int(double v, const fs::path &file, std::size_t line, const char *what)
{
    if (v != std::floor(v) || std::abs(v) > 2e9)
        data_error(file, line, fmt::format("{} must be an integer", what));
    return int(v);
}

// ---------------------------------------------------------------------------------------------
// Panels, trajectory, point cloud

inline std::vector<Panel> read_panels(const fs::path &file)
{
    const auto t = read_numeric_csv(file, {"panel_id", "x", "y", "z"});
    std::vector<Panel> out;
    std::map<int, std::size_t> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        const auto &r = t.rows[i];
        Panel p{as_int(r[0], file, t.line[i], "panel_id"), Vec3(r[1], r[2], r[3])};
        if (seen.count(p.id))
            data_error(file, t.line[i], fmt::format("duplicate panel_id {}", p.id));
        seen[p.id] = i;
        out.push_back(p);
    }
    if (out.empty())
        throw Error(ErrorCode::data, fmt::format("{}: no panels", file.string()));
    return out;
}

inline std::string format_panels(const std::vector<Panel> &panels)
{
    std::string s = "panel_id,x,y,z\n";
    for (const auto &p : panels)
        s += fmt::format("{},{},{},{}\n", p.id, cell(p.position.x()), cell(p.position.y()), cell(p.position.z()));
    return s;
}

inline std::map<int, Vec3> read_trajectory(const fs::path &file)
{
    const auto t = read_numeric_csv(file, {"snapshot", "x", "y", "z"});
    std::map<int, Vec3> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        const auto &r = t.rows[i];
        const int n = as_int(r[0], file, t.line[i], "snapshot");
        if (out.count(n))
            data_error(file, t.line[i], fmt::format("duplicate snapshot {}", n));
        out[n] = Vec3(r[1], r[2], r[3]);
    }
    if (out.empty())
        throw Error(ErrorCode::data, fmt::format("{}: no trajectory rows", file.string()));
    return out;
}

inline std::string format_trajectory(const std::vector<int> &snapshots, const std::vector<Vec3> &pos)
{
    std::string s = "snapshot,x,y,z\n";
    for (std::size_t i = 0; i < snapshots.size(); ++i)
        s += fmt::format("{},{},{},{}\n", snapshots[i], cell(pos[i].x()), cell(pos[i].y()), cell(pos[i].z()));
    return s;
}

// ASCII PLY (vertex element with x, y, z properties) or CSV with x,y,z columns
inline std::vector<Vec3> read_point_cloud(const fs::path &file)
{
    std::vector<Vec3> pts;
    if (file.extension() != ".ply")
    {
        const auto t = read_numeric_csv(file, {});
        for (std::size_t i = 0; i < t.rows.size(); ++i)
        {
            if (t.rows[i].size() < 3)
                data_error(file, t.line[i], "expected x,y,z");
            pts.emplace_back(t.rows[i][0], t.rows[i][1], t.rows[i][2]);
        }
        return pts;
    }

    auto in = open_input(file);
    std::string s;
    std::size_t ln = 0, count = 0;
    bool in_vertex = false, ascii = false;
    std::vector<std::string> props;
    std::vector<std::pair<std::string, std::size_t>> elements;
    std::getline(in, s);
    ++ln;
    if (trim(s) != "ply")
        data_error(file, ln, "missing 'ply' magic");
    while (std::getline(in, s))
    {
        ++ln;
        std::istringstream ls(s);
        std::string kw;
        ls >> kw;
        if (kw == "end_header")
            break;
        if (kw == "format")
        {
            std::string f;
            ls >> f;
            ascii = f == "ascii";
        }
        else if (kw == "element")
        {
            std::string name;
            std::size_t n = 0;
            ls >> name >> n;
            elements.emplace_back(name, n);
            in_vertex = name == "vertex";
            if (in_vertex)
                count = n;
        }
        else if (kw == "property" && in_vertex)
        {
            std::string type, name;
            ls >> type >> name;
            if (type == "list")
                data_error(file, ln, "list properties are not supported on vertices");
            props.push_back(name);
        }
    }
    if (!ascii)
        data_error(file, ln, "only ASCII PLY is supported");
    if (elements.empty() || elements.front().first != "vertex")
        data_error(file, ln, "vertex must be the first element");
    std::size_t ix = props.size(), iy = props.size(), iz = props.size();
    for (std::size_t i = 0; i < props.size(); ++i)
    {
        if (props[i] == "x")
            ix = i;
        if (props[i] == "y")
            iy = i;
        if (props[i] == "z")
            iz = i;
    }
    if (ix == props.size() || iy == props.size() || iz == props.size())
        data_error(file, ln, "vertex element lacks x, y or z");
    pts.reserve(count);
    while (pts.size() < count && std::getline(in, s))
    {
        ++ln;
        std::vector<double> v;
        for (auto tok : split(trim(s), ' '))
        {
            if (tok.empty())
                continue;
            double d = 0.0;
            if (!parse_double(tok, d) || !std::isfinite(d))
                data_error(file, ln, fmt::format("'{}' is not a finite number", tok));
            v.push_back(d);
        }
        if (v.size() != props.size())
            data_error(file, ln, fmt::format("expected {} values, found {}", props.size(), v.size()));
        pts.emplace_back(v[ix], v[iy], v[iz]);
    }
    if (pts.size() != count)
        data_error(file, ln, fmt::format("header announces {} vertices, found {}", count, pts.size()));
    return pts;
}

inline std::string format_point_cloud_ply(const std::vector<Vec3> &pts)
{
    std::string s = fmt::format("ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double "
                                "y\nproperty double z\nend_header\n",
                                pts.size());
    for (const auto &p : pts)
        s += fmt::format("{} {} {}\n", cell(p.x()), cell(p.y()), cell(p.z()));
    return s;
}

// ---------------------------------------------------------------------------------------------
// MPC records

inline std::string mpc_json(const MpcRecord &m)
{
    return fmt::format(R"({{"snapshot":{},"panel":{},"delay_s":{},"az_rad":{},"el_rad":{},"doppler_hz":{},)"
                       R"("amp_v":[{},{}],"amp_h":[{},{}]}})",
                       m.snapshot, m.panel, num(m.delay), num(m.azimuth), num(m.elevation), num(m.doppler),
                       num(m.amp_v.real()), num(m.amp_v.imag()), num(m.amp_h.real()), num(m.amp_h.imag()));
}

inline std::string format_mpcs_jsonl(const std::vector<MpcRecord> &mpcs)
{
    std::string s;
    for (const auto &m : mpcs)
        s += mpc_json(m) + "\n";
    return s;
}

namespace detail
{
inline double json_number(const Json &j, const char *key, const fs::path &file, std::size_t ln)
{
    if (!j.contains(key))
        data_error(file, ln, fmt::format("missing field '{}'", key));
    const auto &v = j.at(key);
    if (!v.is_number())
        data_error(file, ln, fmt::format("field '{}' is not a number", key));
    const double d = v.get<double>();
    if (!std::isfinite(d))
        data_error(file, ln, fmt::format("field '{}' is not finite", key));
    return d;
}

inline int json_int(const Json &j, const char *key, const fs::path &file, std::size_t ln)
{
    if (!j.contains(key) || !j.at(key).is_number_integer())
        data_error(file, ln, fmt::format("field '{}' must be an integer", key));
    return j.at(key).get<int>();
}

inline std::complex<double> json_complex(const Json &j, const char *key, const fs::path &file, std::size_t ln)
{
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2 || !j.at(key)[0].is_number() ||
        !j.at(key)[1].is_number())
        data_error(file, ln, fmt::format("field '{}' must be [re, im]", key));
    return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>()};
}
} // namespace detail

// Invokes f(json, line) for every non-empty line
template <typename F>
inline void for_each_jsonl(const fs::path &file, F f)
{
    auto in = open_input(file);
    std::string s;
    std::size_t ln = 0;
    while (std::getline(in, s))
    {
        ++ln;
        if (trim(s).empty())
            continue;
        Json j;
        try
        {
            j = Json::parse(s);
        }
        catch (const Json::parse_error &e)
        {
            data_error(file, ln, std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object())
            data_error(file, ln, "expected a JSON object");
        f(j, ln);
    }
}

inline std::vector<MpcRecord> read_mpcs(const fs::path &file)
{
    std::vector<MpcRecord> out;
    auto check = [&](MpcRecord &m, std::size_t ln)
    {
        try
        {
            validate(m);
        }
        catch (const Error &e)
        {
            data_error(file, ln, e.what());
        }
        out.push_back(m);
    };
    if (file.extension() == ".csv")
    {
        const auto t = read_numeric_csv(file, {"snapshot", "panel", "delay_s", "az_rad", "el_rad", "doppler_hz",
                                               "amp_v_re", "amp_v_im", "amp_h_re", "amp_h_im"});
        for (std::size_t i = 0; i < t.rows.size(); ++i)
        {
            const auto &r = t.rows[i];
            MpcRecord m;
            m.snapshot = as_int(r[0], file, t.line[i], "snapshot");
            m.panel = as_int(r[1], file, t.line[i], "panel");
            m.delay = r[2];
            m.azimuth = r[3];
            m.elevation = r[4];
            m.doppler = r[5];
            m.amp_v = {r[6], r[7]};
            m.amp_h = {r[8], r[9]};
            check(m, t.line[i]);
        }
    }
    else
    {
        for_each_jsonl(file,
                       [&](const Json &j, std::size_t ln)
                       {
                           MpcRecord m;
                           m.snapshot = detail::json_int(j, "snapshot", file, ln);
                           m.panel = detail::json_int(j, "panel", file, ln);
                           m.delay = detail::json_number(j, "delay_s", file, ln);
                           m.azimuth = detail::json_number(j, "az_rad", file, ln);
                           m.elevation = detail::json_number(j, "el_rad", file, ln);
                           m.doppler = detail::json_number(j, "doppler_hz", file, ln);
                           m.amp_v = detail::json_complex(j, "amp_v", file, ln);
                           m.amp_h = detail::json_complex(j, "amp_h", file, ln);
                           check(m, ln);
                       });
    }
    if (out.empty())
        throw Error(ErrorCode::data, fmt::format("{}: no MPC records", file.string()));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Interactions

inline std::string format_interactions(const std::vector<Interaction> &its)
{
    std::string s;
    for (const auto &it : its)
        s += fmt::format(R"({{"mpc_index":{},"snapshot":{},"panel":{},"io":{},"partial_delay_s":{},"power":{},)"
                         R"("clamped":{}}})"
                         "\n",
                         it.mpc_index, it.snapshot, it.panel, vec_json(it.io_center), num(it.partial_delay),
                         num(it.power), it.clamped);
    return s;
}

inline std::vector<Interaction> read_interactions(const fs::path &file)
{
    std::vector<Interaction> out;
    for_each_jsonl(file,
                   [&](const Json &j, std::size_t ln)
                   {
                       Interaction it;
                       const int idx = detail::json_int(j, "mpc_index", file, ln);
                       if (idx < 0)
                           data_error(file, ln, "mpc_index must be >= 0");
                       it.mpc_index = std::size_t(idx);
                       it.snapshot = detail::json_int(j, "snapshot", file, ln);
                       it.panel = detail::json_int(j, "panel", file, ln);
                       if (!j.contains("io") || !j["io"].is_array() || j["io"].size() != 3)
                           data_error(file, ln, "field 'io' must be [x, y, z]");
                       for (int i = 0; i < 3; ++i)
                       {
                           if (!j["io"][i].is_number())
                               data_error(file, ln, "field 'io' must hold numbers");
                           it.io_center(i) = j["io"][i].get<double>();
                       }
                       it.partial_delay = detail::json_number(j, "partial_delay_s", file, ln);
                       it.power = detail::json_number(j, "power", file, ln);
                       it.clamped = j.value("clamped", false);
                       out.push_back(it);
                   });
    return out;
}

} // namespace mpcc

#endif
