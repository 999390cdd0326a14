#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/solver.hpp"

namespace pnpflow {

namespace detail {

// Shortest decimal that round-trips a 64-bit real.
inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline int pbm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok.empty() ? EOF : 0;
}

}  // namespace detail

// P5 (single channel, shape {H,W}) or P6 ({3,H,W}), maxval 255, binary.
// Values in [-1,1] map to bytes by round((v+1) * 127.5).
inline void write_netpbm(const std::string& path, const Grid& x) {
    std::size_t C, H, W;
    if (x.rank() == 2) {
        C = 1;
        H = x.shape()[0];
        W = x.shape()[1];
    } else if (x.rank() == 3 && x.shape()[0] == 3) {
        C = 3;
        H = x.shape()[1];
        W = x.shape()[2];
    } else {
        throw shape_error("write_netpbm: need shape {H,W} or {3,H,W}");
    }
    for (double v : x) {
        if (!(v >= -1.0 && v <= 1.0)) {
            throw validation_error("write_netpbm: values must lie in [-1,1]");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_netpbm: cannot open " + path);
    out << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> bytes(C * H * W);
    // interleave channels pixel-wise for P6
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t q = 0; q < W; ++q) {
            for (std::size_t c = 0; c < C; ++c) {
                const double v = x[c * H * W + r * W + q];
                bytes[(r * W + q) * C + c] =
                    static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write_netpbm: write failed for " + path);
}

inline Grid read_netpbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_netpbm: cannot open " + path);
    std::string tok;
    if (detail::pbm_next_token(in, tok) == EOF || (tok != "P5" && tok != "P6")) {
        throw io_error("read_netpbm: bad magic in " + path);
    }
    const std::size_t C = tok == "P5" ? 1 : 3;
    std::size_t W = 0, H = 0, maxval = 0;
    for (std::size_t* field : {&W, &H, &maxval}) {
        if (detail::pbm_next_token(in, tok) == EOF) {
            throw io_error("read_netpbm: truncated header in " + path);
        }
        std::istringstream is(tok);
        if (!(is >> *field)) throw io_error("read_netpbm: malformed header in " + path);
    }
    if (W == 0 || H == 0) throw io_error("read_netpbm: zero extent in " + path);
    if (maxval != 255) throw io_error("read_netpbm: only maxval 255 is supported");
    std::vector<unsigned char> bytes(C * H * W);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw io_error("read_netpbm: truncated payload in " + path);
    }
    Grid x(C == 1 ? std::vector<std::size_t>{H, W} : std::vector<std::size_t>{3, H, W});
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t q = 0; q < W; ++q) {
            for (std::size_t c = 0; c < C; ++c) {
                x[c * H * W + r * W + q] = bytes[(r * W + q) * C + c] / 127.5 - 1.0;
            }
        }
    }
    return x;
}

// One point per line, comma-separated, 17 significant digits (lossless for
// 64-bit reals). An optional non-numeric header line is skipped on read.
inline void write_points_csv(const std::string& path, const std::vector<Grid>& pts) {
    std::ofstream out(path);
    if (!out) throw io_error("write_points_csv: cannot open " + path);
    for (const Grid& p : pts) {
        for (double v : p) {
            if (!std::isfinite(v)) throw validation_error("write_points_csv: non-finite value");
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) out << ",";
            out << detail::fmt_g17(p[i]);
        }
        out << "\n";
    }
    if (!out) throw io_error("write_points_csv: write failed for " + path);
}

inline std::vector<Grid> read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_points_csv: cannot open " + path);
    std::vector<Grid> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::size_t pos = 0;
        bool ok = true;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                ok = false;
                break;
            }
            vals.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!ok) {
            if (lineno == 1 && pts.empty()) continue;  // header line
            throw io_error("read_points_csv: parse failure at line " + std::to_string(lineno) +
                           " of " + path);
        }
        if (!pts.empty() && vals.size() != pts.front().size()) {
            throw io_error("read_points_csv: inconsistent width at line " +
                           std::to_string(lineno) + " of " + path);
        }
        pts.emplace_back(std::vector<std::size_t>{vals.size()}, std::move(vals));
    }
    return pts;
}

inline void write_loss_csv(const std::string& path, const std::vector<double>& curve) {
    std::ofstream out(path);
    if (!out) throw io_error("write_loss_csv: cannot open " + path);
    out << "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out << (i + 1) << "," << detail::fmt_g17(curve[i]) << "\n";
    }
    if (!out) throw io_error("write_loss_csv: write failed for " + path);
}

inline void write_trace_csv(const std::string& path, const SolveTrace& trace) {
    std::ofstream out(path);
    if (!out) throw io_error("write_trace_csv: cannot open " + path);
    out << "n,t,gamma,delta_norm,psnr\n";
    for (std::size_t n = 0; n < trace.t.size(); ++n) {
        out << n << "," << detail::fmt_g17(trace.t[n]) << "," << detail::fmt_g17(trace.gamma[n])
            << "," << detail::fmt_g17(trace.delta_norm[n]) << ","
            << detail::fmt_g17(trace.psnr[n]) << "\n";
    }
    if (!out) throw io_error("write_trace_csv: write failed for " + path);
}

}  // namespace pnpflow
