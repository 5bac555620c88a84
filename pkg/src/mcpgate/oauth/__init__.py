from .pkce import compute_challenge, is_valid_verifier
from .store import (
    AuthorizationGrant,
    ClientRegistration,
    ClientStore,
    GrantStore,
    TokenRecord,
    TokenStore,
)
from .service import AuthService, OAuthConfig

__all__ = [
    "compute_challenge",
    "is_valid_verifier",
    "ClientRegistration",
    "AuthorizationGrant",
    "TokenRecord",
    "ClientStore",
    "GrantStore",
    "TokenStore",
    "AuthService",
    "OAuthConfig",
]
