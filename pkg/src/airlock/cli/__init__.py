"""Command-line tools: consumer client, offline signer, zone admin console.

Shared exit-code contract across all three tools.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_AUTH = 3
EXIT_REMOTE = 4
EXIT_TRANSPORT = 5
