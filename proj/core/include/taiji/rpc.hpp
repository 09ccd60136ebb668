#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "taiji/common.hpp"

namespace taiji {

namespace rpc_error {
constexpr int kInvalidRequest = -32600;
constexpr int kMethodNotFound = -32601;
constexpr int kInvalidParams = -32602;
constexpr int kInternal = -32603;
constexpr int kParse = -32700;
// application range
constexpr int kToolExecution = -32050;
constexpr int kTimeout = -32051;
constexpr int kUnknownResource = -32052;
}  // namespace rpc_error

class RpcError : public Error {
public:
    RpcError(int code, const std::string& message)
        : Error(message), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

// One JSON-RPC 2.0 envelope: request, response, or notification.
struct RpcMessage {
    enum class Kind { Request, Response, Notification };

    Kind kind = Kind::Notification;
    nlohmann::json id;            // request/response; number or string
    std::string method;           // request/notification
    nlohmann::json params;        // request/notification
    nlohmann::json result;        // successful response
    bool is_error = false;        // response carries an error instead
    int error_code = 0;
    std::string error_message;

    static RpcMessage request(nlohmann::json id, std::string method, nlohmann::json params);
    static RpcMessage response(nlohmann::json id, nlohmann::json result);
    static RpcMessage error_response(nlohmann::json id, int code, std::string message);
    static RpcMessage notification(std::string method, nlohmann::json params);

    bool operator==(const RpcMessage&) const = default;
};

// Canonical wire form: key-ordered JSON, protocol version "2.0", no newline.
std::string encode(const RpcMessage& msg);

// Strict on the envelope (version, id/method presence), lenient on unknown
// fields. Throws RpcError with kParse / kInvalidRequest.
RpcMessage decode(const std::string& bytes);

}  // namespace taiji
