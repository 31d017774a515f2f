#include "ueval/http_util.hpp"

#include <httplib.h>

namespace ueval {

std::unique_ptr<httplib::Client> make_http_client(const std::string& base_url, int timeout_ms) {
    auto client = std::make_unique<httplib::Client>(base_url);
    client->set_connection_timeout(0, timeout_ms * 1000);
    client->set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client->set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    return client;
}

}  // namespace ueval
