#pragma once

// Read-only HTTP/JSON query service over immutable databases. The routing and
// query logic is socket-free (handle_request) so it can be tested directly;
// serve() only wires it to an HTTP listener. Documented in docs/http_api.md.

#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "romdb/database.hpp"

namespace romdb {

class DatabaseSet {
 public:
  /// InvalidInput on duplicate ids.
  void add(const std::string& id, RomDatabase db);
  [[nodiscard]] const RomDatabase* find(const std::string& id) const;
  [[nodiscard]] const std::map<std::string, RomDatabase>& all() const noexcept { return dbs_; }

 private:
  std::map<std::string, RomDatabase> dbs_;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // canonical JSON (sorted keys)
};

/// HTTP status for a failure kind: 400 validation, 422 domain violations, 500 numerical.
[[nodiscard]] int http_status(ErrorKind kind) noexcept;

/// {"error": taxonomy name, "message": ..., "field": ...}
[[nodiscard]] nlohmann::json error_body(const Error& e);

/// Executes one QueryRequest against a database; throws romdb::Error.
[[nodiscard]] nlohmann::json run_query(const RomDatabase& db, const nlohmann::json& request);

/// Routes GET /databases, GET /databases/{id}/meta and POST /databases/{id}/query.
[[nodiscard]] HttpResponse handle_request(const DatabaseSet& set, const std::string& method, const std::string& path,
                                          const std::string& body);

/// Blocks serving requests until the process is stopped. `on_ready` receives the bound port.
void serve(const DatabaseSet& set, const std::string& host, int port,
           const std::function<void(int)>& on_ready = {});

}  // namespace romdb
