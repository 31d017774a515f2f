#pragma once

// ueval/http_util.hpp — shared construction of httplib clients from a base
// URL ("http://host:port" or "host:port").

#include <memory>
#include <string>

namespace httplib {
class Client;
}

namespace ueval {

std::unique_ptr<httplib::Client> make_http_client(const std::string& base_url, int timeout_ms);

}  // namespace ueval
