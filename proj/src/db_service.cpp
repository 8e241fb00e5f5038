#include "tvws/db_service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace tvws {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'W', 'S', 'D', 'B', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& buf, T v) {
    put_bytes(buf, &v, sizeof v);
}

void put_matrix(std::string& buf, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put(buf, m(i, j));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw DbError(DbErrorKind::Truncated, "database file truncated");
    }
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof v);
        pos += sizeof v;
        return v;
    }
    void get_bytes(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
};

}  // namespace

void save_database(const DatabaseHandle& db, const std::string& path) {
    std::string buf;
    const MpepMap& m = db.mpep;
    std::size_t cells = static_cast<std::size_t>(m.grid.rows) * m.grid.cols;
    buf.reserve(64 + db.scenario_id.size() + cells * 25);

    put_bytes(buf, kMagic, sizeof kMagic);
    put(buf, kVersion);
    put(buf, static_cast<std::uint32_t>(db.scenario_id.size()));
    put_bytes(buf, db.scenario_id.data(), db.scenario_id.size());
    put(buf, db.build_timestamp);
    put(buf, db.param_digest);
    put(buf, db.cell_bs.x_km);
    put(buf, db.cell_bs.y_km);
    put(buf, db.r_cell_km);
    put(buf, m.grid.origin.x_km);
    put(buf, m.grid.origin.y_km);
    put(buf, m.grid.cell_size_m);
    put(buf, static_cast<std::uint32_t>(m.grid.rows));
    put(buf, static_cast<std::uint32_t>(m.grid.cols));
    put_matrix(buf, m.mpep_dbm);
    for (int i = 0; i < m.grid.rows; ++i)
        for (int j = 0; j < m.grid.cols; ++j) put(buf, m.space_class(i, j));
    put_matrix(buf, m.wcrp_x);
    put_matrix(buf, m.wcrp_y);
    put(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DbError(DbErrorKind::Io, "cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DbError(DbErrorKind::Io, "short write to " + path);
}

DatabaseHandle load_database(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DbError(DbErrorKind::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string buf = ss.str();

    if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        throw DbError(DbErrorKind::BadMagic, path + ": not a database file");
    if (buf.size() < sizeof kMagic + sizeof(std::uint64_t))
        throw DbError(DbErrorKind::Truncated, "database file truncated");
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - sizeof stored, sizeof stored);
    if (fnv1a64(buf.data(), buf.size() - sizeof stored) != stored)
        throw DbError(DbErrorKind::BadChecksum, path + ": checksum mismatch");

    Reader r{buf};
    r.pos = sizeof kMagic;
    std::uint32_t version = r.get<std::uint32_t>();
    if (version != kVersion)
        throw DbError(DbErrorKind::BadVersion,
                      path + ": unsupported database version " + std::to_string(version));

    DatabaseHandle db;
    std::uint32_t id_len = r.get<std::uint32_t>();
    if (id_len > 4096) throw DbError(DbErrorKind::Truncated, "implausible scenario id length");
    db.scenario_id.resize(id_len);
    r.get_bytes(db.scenario_id.data(), id_len);
    db.build_timestamp = r.get<std::uint64_t>();
    db.param_digest = r.get<std::uint64_t>();
    db.cell_bs.x_km = r.get<double>();
    db.cell_bs.y_km = r.get<double>();
    db.r_cell_km = r.get<double>();

    MpepMap& m = db.mpep;
    m.grid.origin.x_km = r.get<double>();
    m.grid.origin.y_km = r.get<double>();
    m.grid.cell_size_m = r.get<double>();
    std::uint32_t rows = r.get<std::uint32_t>();
    std::uint32_t cols = r.get<std::uint32_t>();
    if (rows == 0 || cols == 0 ||
        static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 28))
        throw DbError(DbErrorKind::Truncated, "implausible grid dimensions");
    m.grid.rows = static_cast<int>(rows);
    m.grid.cols = static_cast<int>(cols);

    auto read_matrix = [&](Eigen::MatrixXd& out) {
        out.resize(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) out(i, j) = r.get<double>();
    };
    read_matrix(m.mpep_dbm);
    m.space_class.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) {
            std::uint8_t c = r.get<std::uint8_t>();
            if (c > 3) throw DbError(DbErrorKind::BadChecksum, "invalid class code");
            m.space_class(i, j) = c;
        }
    read_matrix(m.wcrp_x);
    read_matrix(m.wcrp_y);
    if (r.pos + sizeof(std::uint64_t) != buf.size())
        throw DbError(DbErrorKind::Truncated, "database file has trailing data");
    return db;
}

QueryResult query(const DatabaseHandle& db, const Location& loc) {
    QueryResult res;
    auto cell = db.mpep.grid.cell_of(loc);
    if (!cell) {
        res.status = QueryResult::Status::OutOfArea;
        return res;
    }
    res.cls = db.mpep.cls(cell->first, cell->second);
    if (res.cls == SpaceClass::OutOfCell) {
        res.status = QueryResult::Status::OutOfCell;
        return res;
    }
    res.status = QueryResult::Status::Ok;
    res.mpep_dbm = db.mpep.mpep_dbm(cell->first, cell->second);
    return res;
}

namespace {

const char* class_name(SpaceClass c) {
    switch (c) {
        case SpaceClass::Black:
            return "BLACK";
        case SpaceClass::Gray:
            return "GRAY";
        case SpaceClass::White:
            return "WHITE";
        case SpaceClass::OutOfCell:
            return "OUTOFCELL";
    }
    return "UNKNOWN";
}

bool parse_number(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size() && std::isfinite(out);
}

}  // namespace

std::string handle_request_line(const DatabaseHandle& db, const std::string& line) {
    std::istringstream ls(line);
    std::string verb;
    ls >> verb;
    if (verb == "PING") {
        std::string extra;
        if (ls >> extra) return "ERR BADREQ";
        return "PONG";
    }
    if (verb == "INFO") {
        std::string extra;
        if (ls >> extra) return "ERR BADREQ";
        char buf[160];
        std::snprintf(buf, sizeof buf, "OK %s %dx%d %016llx %llu",
                      db.scenario_id.empty() ? "-" : db.scenario_id.c_str(), db.mpep.grid.rows,
                      db.mpep.grid.cols, static_cast<unsigned long long>(db.param_digest),
                      static_cast<unsigned long long>(db.build_timestamp));
        return buf;
    }
    if (verb == "QUERY") {
        std::string xs, ys, extra;
        if (!(ls >> xs >> ys) || (ls >> extra)) return "ERR BADREQ";
        Location loc;
        if (!parse_number(xs, loc.x_km) || !parse_number(ys, loc.y_km)) return "ERR BADREQ";
        QueryResult res = query(db, loc);
        switch (res.status) {
            case QueryResult::Status::OutOfArea:
                return "ERR OUTOFAREA";
            case QueryResult::Status::OutOfCell:
                return "ERR OUTOFCELL";
            case QueryResult::Status::Ok:
                break;
        }
        char buf[64];
        if (std::isnan(res.mpep_dbm)) {
            std::snprintf(buf, sizeof buf, "OK NOTX %s", class_name(res.cls));
        } else {
            std::snprintf(buf, sizeof buf, "OK %.2f %s", res.mpep_dbm, class_name(res.cls));
        }
        return buf;
    }
    return "ERR BADREQ";
}

DbServer::DbServer(std::shared_ptr<const DatabaseHandle> db, const std::string& host,
                   std::uint16_t port)
    : db_(std::move(db)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw std::runtime_error("bad listen address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 128) != 0) {
        ::close(listen_fd_);
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);

    accept_thread_ = std::thread([this] { accept_loop(); });
}

DbServer::~DbServer() { stop(); }

void DbServer::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) {
        if (accept_thread_.joinable()) accept_thread_.join();
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    ::close(listen_fd_);

    std::vector<int> fds;
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lk(clients_mu_);
        fds.swap(client_fds_);
        threads.swap(client_threads_);
    }
    for (int fd : fds) ::shutdown(fd, SHUT_RDWR);
    for (auto& t : threads)
        if (t.joinable()) t.join();
    for (int fd : fds) ::close(fd);
}

void DbServer::accept_loop() {
    while (!stopping_.load()) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_.load()) break;
            continue;
        }
        std::lock_guard<std::mutex> lk(clients_mu_);
        if (stopping_.load()) {
            ::close(fd);
            break;
        }
        client_fds_.push_back(fd);
        client_threads_.emplace_back([this, fd] { client_loop(fd); });
    }
}

void DbServer::client_loop(int fd) {
    std::string pending;
    char buf[4096];
    while (!stopping_.load()) {
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        pending.append(buf, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (;;) {
            std::size_t nl = pending.find('\n', start);
            if (nl == std::string::npos) break;
            std::string line = pending.substr(start, nl - start);
            start = nl + 1;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string resp = handle_request_line(*db_, line) + "\n";
            std::size_t off = 0;
            while (off < resp.size()) {
                ssize_t w = ::send(fd, resp.data() + off, resp.size() - off, MSG_NOSIGNAL);
                if (w <= 0) return;
                off += static_cast<std::size_t>(w);
            }
        }
        pending.erase(0, start);
        if (pending.size() > 1 << 20) break;  // line absurdly long, drop the client
    }
}

}  // namespace tvws
