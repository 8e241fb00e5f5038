#include "tvws/matrix_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tvws {

namespace {
constexpr char kMagic[4] = {'T', 'V', 'W', 'S'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void get(std::istream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("matrix file truncated: " + path);
}
}  // namespace

void write_matrix_text(const PartialSpectrumMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[40];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ' ';
            if (m.known(i, j)) {
                std::snprintf(buf, sizeof buf, "%.17g", m.values(i, j));
                out << buf;
            } else {
                out << "NA";
            }
        }
        out << '\n';
    }
}

PartialSpectrumMatrix read_matrix_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::vector<std::pair<bool, double>>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::pair<bool, double>> row;
        std::string tok;
        while (ls >> tok) {
            if (tok == "NA") {
                row.push_back({false, 0.0});
            } else {
                char* end = nullptr;
                double v = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0')
                    throw std::runtime_error("matrix text: bad token '" + tok + "' in " + path);
                row.push_back({true, v});
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("matrix text: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("matrix text: empty file " + path);

    PartialSpectrumMatrix m;
    int p = static_cast<int>(rows.size());
    int q = static_cast<int>(rows.front().size());
    m.values = Eigen::MatrixXd::Zero(p, q);
    m.known.setZero(p, q);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < q; ++j) {
            m.known(i, j) = rows[i][j].first ? 1 : 0;
            m.values(i, j) = rows[i][j].second;
        }
    }
    return m;
}

void write_matrix_binary(const PartialSpectrumMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(m.rows()));
    put(out, static_cast<std::uint32_t>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) put(out, m.values(i, j));
    std::size_t bits = static_cast<std::size_t>(m.rows()) * m.cols();
    std::vector<std::uint8_t> mask((bits + 7) / 8, 0);
    std::size_t idx = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j, ++idx)
            if (m.known(i, j)) mask[idx / 8] |= static_cast<std::uint8_t>(1u << (idx % 8));
    out.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

PartialSpectrumMatrix read_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("matrix file: bad magic in " + path);
    std::uint16_t version;
    get(in, version, path);
    if (version != kVersion)
        throw std::runtime_error("matrix file: unsupported version in " + path);
    std::uint32_t p, q;
    get(in, p, path);
    get(in, q, path);
    if (p == 0 || q == 0 || static_cast<std::uint64_t>(p) * q > (1u << 28))
        throw std::runtime_error("matrix file: implausible dimensions in " + path);

    PartialSpectrumMatrix m;
    m.values.resize(p, q);
    m.known.setZero(p, q);
    for (std::uint32_t i = 0; i < p; ++i)
        for (std::uint32_t j = 0; j < q; ++j) get(in, m.values(i, j), path);
    std::size_t bits = static_cast<std::size_t>(p) * q;
    std::vector<std::uint8_t> mask((bits + 7) / 8);
    in.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    if (!in) throw std::runtime_error("matrix file truncated: " + path);
    std::size_t idx = 0;
    for (std::uint32_t i = 0; i < p; ++i)
        for (std::uint32_t j = 0; j < q; ++j, ++idx)
            m.known(i, j) = (mask[idx / 8] >> (idx % 8)) & 1u;
    return m;
}

PartialSpectrumMatrix full_matrix(const Eigen::MatrixXd& values) {
    PartialSpectrumMatrix m;
    m.values = values;
    m.known.setConstant(values.rows(), values.cols(), 1);
    return m;
}

}  // namespace tvws
