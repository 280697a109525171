#pragma once

#include <string>
#include <utility>
#include <vector>

namespace framebeat::detail {

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// POST with a body; throws BackendUnavailable on transport errors.
HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::vector<std::pair<std::string, std::string>>& headers, double timeout_seconds);
HttpResponse http_get(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                      double timeout_seconds);

struct MultipartField {
  std::string name;
  std::string content;
  std::string filename;
  std::string content_type;
};
HttpResponse http_post_multipart(const std::string& url, const std::vector<MultipartField>& fields,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 double timeout_seconds);

std::string base64(const std::string& bytes);

}  // namespace framebeat::detail
