#include "taiji/rpc.hpp"

namespace taiji {

RpcMessage RpcMessage::request(nlohmann::json id, std::string method, nlohmann::json params) {
    RpcMessage m;
    m.kind = Kind::Request;
    m.id = std::move(id);
    m.method = std::move(method);
    m.params = std::move(params);
    return m;
}

RpcMessage RpcMessage::response(nlohmann::json id, nlohmann::json result) {
    RpcMessage m;
    m.kind = Kind::Response;
    m.id = std::move(id);
    m.result = std::move(result);
    return m;
}

RpcMessage RpcMessage::error_response(nlohmann::json id, int code, std::string message) {
    RpcMessage m;
    m.kind = Kind::Response;
    m.id = std::move(id);
    m.is_error = true;
    m.error_code = code;
    m.error_message = std::move(message);
    return m;
}

RpcMessage RpcMessage::notification(std::string method, nlohmann::json params) {
    RpcMessage m;
    m.kind = Kind::Notification;
    m.method = std::move(method);
    m.params = std::move(params);
    return m;
}

std::string encode(const RpcMessage& msg) {
    nlohmann::json j{{"jsonrpc", "2.0"}};
    switch (msg.kind) {
        case RpcMessage::Kind::Request:
            j["id"] = msg.id;
            j["method"] = msg.method;
            if (!msg.params.is_null()) j["params"] = msg.params;
            break;
        case RpcMessage::Kind::Response:
            j["id"] = msg.id;
            if (msg.is_error) {
                j["error"] = {{"code", msg.error_code}, {"message", msg.error_message}};
            } else {
                j["result"] = msg.result;
            }
            break;
        case RpcMessage::Kind::Notification:
            j["method"] = msg.method;
            if (!msg.params.is_null()) j["params"] = msg.params;
            break;
    }
    return j.dump();
}

RpcMessage decode(const std::string& bytes) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw RpcError(rpc_error::kParse, "malformed JSON");
    if (!j.is_object()) throw RpcError(rpc_error::kInvalidRequest, "message must be an object");
    if (!j.contains("jsonrpc") || j["jsonrpc"] != "2.0") {
        throw RpcError(rpc_error::kInvalidRequest, "missing or wrong protocol version");
    }

    bool has_id = j.contains("id") && !j["id"].is_null();
    bool has_method = j.contains("method");

    if (has_method) {
        if (!j["method"].is_string()) {
            throw RpcError(rpc_error::kInvalidRequest, "method must be a string");
        }
        RpcMessage m;
        m.kind = has_id ? RpcMessage::Kind::Request : RpcMessage::Kind::Notification;
        if (has_id) m.id = j["id"];
        m.method = j["method"].get<std::string>();
        m.params = j.value("params", nlohmann::json());
        return m;
    }

    if (!has_id) {
        throw RpcError(rpc_error::kInvalidRequest, "response without id");
    }
    RpcMessage m;
    m.kind = RpcMessage::Kind::Response;
    m.id = j["id"];
    if (j.contains("error")) {
        const auto& e = j["error"];
        if (!e.is_object() || !e.contains("code") || !e.contains("message")) {
            throw RpcError(rpc_error::kInvalidRequest, "malformed error object");
        }
        m.is_error = true;
        m.error_code = e["code"].get<int>();
        m.error_message = e["message"].get<std::string>();
    } else if (j.contains("result")) {
        m.result = j["result"];
    } else {
        throw RpcError(rpc_error::kInvalidRequest, "response needs result or error");
    }
    return m;
}

}  // namespace taiji
