"""Coercion-resistant in-person voter registration and voting.

Booth ceremonies produce paper credential bundles whose real/fake status
is visible only in the order the pieces were printed; an authenticated
append-only ledger carries every public artifact; ballots are filtered
against the registered roll with plaintext-equivalence tests before a
threshold decryption of the count.
"""

__version__ = "0.1.0"

from votebooth.groups import group_setup, GroupError  # noqa: F401
