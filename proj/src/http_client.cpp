#include "http_client.hpp"

#include <httplib.h>

#include "framebeat/error.hpp"

namespace framebeat::detail {

namespace {

struct Target {
  std::string origin;
  std::string path;
};

Target split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::ConfigError, "url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

httplib::Headers to_headers(const std::vector<std::pair<std::string, std::string>>& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

std::unique_ptr<httplib::Client> client_for(const Target& target, double timeout_seconds) {
  auto client = std::make_unique<httplib::Client>(target.origin);
  const auto usec = static_cast<time_t>(timeout_seconds * 1e6);
  client->set_connection_timeout(usec / 1000000, static_cast<time_t>(usec % 1000000));
  client->set_read_timeout(usec / 1000000, static_cast<time_t>(usec % 1000000));
  client->set_write_timeout(usec / 1000000, static_cast<time_t>(usec % 1000000));
  return client;
}

HttpResponse finish(const httplib::Result& result, const std::string& url) {
  if (!result) {
    throw Error(ErrorCode::BackendUnavailable, url + ": " + httplib::to_string(result.error()));
  }
  return {result->status, result->body, result->get_header_value("Content-Type")};
}

}  // namespace

HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::vector<std::pair<std::string, std::string>>& headers, double timeout_seconds) {
  const Target target = split_url(url);
  auto client = client_for(target, timeout_seconds);
  return finish(client->Post(target.path, to_headers(headers), body, content_type), url);
}

HttpResponse http_get(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                      double timeout_seconds) {
  const Target target = split_url(url);
  auto client = client_for(target, timeout_seconds);
  return finish(client->Get(target.path, to_headers(headers)), url);
}

HttpResponse http_post_multipart(const std::string& url, const std::vector<MultipartField>& fields,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 double timeout_seconds) {
  const Target target = split_url(url);
  auto client = client_for(target, timeout_seconds);
  httplib::MultipartFormDataItems items;
  for (const auto& f : fields) items.push_back({f.name, f.content, f.filename, f.content_type});
  return finish(client->Post(target.path, to_headers(headers), items), url);
}

std::string base64(const std::string& bytes) { return httplib::detail::base64_encode(bytes); }

}  // namespace framebeat::detail
