#pragma once

// HTTP+JSON front end for DialogueService.
//
//   POST /sessions                {"clip_id"}  -> 201 {"id", "clip_id"}
//   POST /sessions/{id}/questions {"text"}     -> 200 round record
//   GET  /sessions/{id}                        -> 200 session with rounds
//   GET  /clips                                -> 200 [{"clip_id", "caption", "frames"}]
//
// Errors: {"error": {"code", "message"}} with a 4xx status.

#include "hear/service.hpp"

#include <memory>
#include <string>

namespace hear {

class HttpServer {
  public:
    explicit HttpServer(DialogueService& service);
    ~HttpServer();

    // Returns the bound port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hear
