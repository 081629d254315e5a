#pragma once

#include <filesystem>
#include <fstream>

#include "pairwave/config.hpp"
#include "pairwave/riccati.hpp"

namespace pairwave {

// JSON serialization with pinned number formatting: every floating-point
// value prints as %.17g (bit-faithful round trip), keys iterate in sorted
// order, output is byte-deterministic.

namespace detail {

inline std::string format_double17(double v) {
    if (!std::isfinite(v)) throw invalid_input("report: non-finite value cannot be serialized");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void dump_json17_rec(const json& j, std::string& out, int depth) {
    const std::string pad(2 * size_t(depth), ' ');
    const std::string pad_in(2 * size_t(depth + 1), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + json(it.key()).dump() + ": ";
                dump_json17_rec(it.value(), out, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const json& item : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_json17_rec(item, out, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::number_float:
            out += format_double17(j.get<double>());
            return;
        default:
            out += j.dump();  // integers, strings, booleans, null
            return;
    }
}

}  // namespace detail

inline std::string dump_json17(const json& j) {
    std::string out;
    detail::dump_json17_rec(j, out, 0);
    out += "\n";
    return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw invalid_input("cannot open for writing: " + path.string());
    f << content;
    if (!f) throw invalid_input("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw dependency_error("cannot open: " + path.string());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// --- value -> json helpers -------------------------------------------------

inline json complex_to_json(complex_t z) {
    return json::array({z.real(), z.imag()});
}

inline json rvec_to_json(const RVec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline json vec_to_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v[i]));
    return out;
}

// row-major [re, im] pairs
inline json mat_to_json(const Mat& m) {
    json out = json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out.push_back(complex_to_json(m(r, c)));
    return out;
}

inline Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v[long(i)] = complex_t(j[i][0].get<double>(), j[i][1].get<double>());
    return v;
}

inline Mat mat_from_json(const json& j, int rows, int cols) {
    require(long(j.size()) == long(rows) * cols, "mat_from_json: size mismatch");
    Mat m(rows, cols);
    size_t idx = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c, ++idx)
            m(r, c) = complex_t(j[idx][0].get<double>(), j[idx][1].get<double>());
    return m;
}

// --- plot-ready CSV --------------------------------------------------------

inline std::string spectrum_csv(const RVec& E) {
    std::string out = "j,E_j\n";
    for (int i = 0; i < E.size(); ++i) {
        out += std::to_string(i + 1);
        out += ",";
        out += detail::format_double17(E[i]);
        out += "\n";
    }
    return out;
}

inline std::string convergence_csv(const std::vector<TraceRow>& trace) {
    std::string out = "iter,energy,residual\n";
    for (const TraceRow& row : trace) {
        out += std::to_string(row.iter);
        out += ",";
        out += detail::format_double17(row.energy);
        out += ",";
        out += detail::format_double17(row.residual);
        out += "\n";
    }
    return out;
}

struct SweepRow {
    double param;
    int j;
    double E;
};

inline std::string sweep_csv(const std::string& param_name, const std::vector<SweepRow>& rows) {
    std::string out = param_name + ",j,E_j\n";
    for (const SweepRow& row : rows) {
        out += detail::format_double17(row.param);
        out += ",";
        out += std::to_string(row.j);
        out += ",";
        out += detail::format_double17(row.E);
        out += "\n";
    }
    return out;
}

inline std::string kernel_json_text(int M, const Mat& k) {
    json j;
    j["M"] = M;
    j["k"] = mat_to_json(k);
    return dump_json17(j);
}

}  // namespace pairwave
