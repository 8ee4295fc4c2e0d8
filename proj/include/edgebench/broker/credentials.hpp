#pragma once

#include <map>
#include <optional>
#include <string>

#include "edgebench/bytes.hpp"

namespace edgebench::broker {

/// Encodes a password as "pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>".
std::string hash_password(std::string_view password, int iterations = 1000);
bool verify_password(std::string_view password, const std::string& encoded);

enum class AuthResult { Ok, BadCredentials, NotAuthorized };

class CredentialStore {
 public:
  void add_user(const std::string& user, std::string_view password);
  /// Registers an already-encoded hash (see hash_password).
  void add_hashed(const std::string& user, std::string encoded);
  bool enabled() const { return !users_.empty(); }

  AuthResult check(const std::optional<std::string>& user, const std::optional<Bytes>& password) const;

 private:
  std::map<std::string, std::string> users_;
};

}  // namespace edgebench::broker
