#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tvws/digest.hpp"
#include "tvws/grid.hpp"

namespace tvws {

struct DatabaseHandle {
    MpepMap mpep;
    std::string scenario_id;
    std::uint64_t build_timestamp = 0;  // unix seconds
    std::uint64_t param_digest = 0;     // FNV-1a of the canonical config text
    Location cell_bs;
    double r_cell_km = 0.0;
};

enum class DbErrorKind { BadMagic, BadVersion, Truncated, BadChecksum, Io };

class DbError : public std::runtime_error {
public:
    DbError(DbErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    DbErrorKind kind() const { return kind_; }

private:
    DbErrorKind kind_;
};

void save_database(const DatabaseHandle& db, const std::string& path);
DatabaseHandle load_database(const std::string& path);

struct QueryResult {
    enum class Status { Ok, OutOfArea, OutOfCell } status = Status::Ok;
    double mpep_dbm = 0.0;  // NaN: no transmission
    SpaceClass cls = SpaceClass::Black;
};

QueryResult query(const DatabaseHandle& db, const Location& loc);

// One response line ("OK ..."/"ERR ...") for one request line.
std::string handle_request_line(const DatabaseHandle& db, const std::string& line);

// Line-protocol TCP server; thread per connection, database shared read-only.
class DbServer {
public:
    DbServer(std::shared_ptr<const DatabaseHandle> db, const std::string& host,
             std::uint16_t port);
    ~DbServer();

    DbServer(const DbServer&) = delete;
    DbServer& operator=(const DbServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

private:
    void accept_loop();
    void client_loop(int fd);

    std::shared_ptr<const DatabaseHandle> db_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex clients_mu_;
    std::vector<int> client_fds_;
    std::vector<std::thread> client_threads_;
};

}  // namespace tvws
