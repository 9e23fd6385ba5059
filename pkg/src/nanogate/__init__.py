"""nanogate: a CAPTCHA-replacement access gate built on Nano micropayments.

A client proves control of a wallet by switching its representative to a
gate-chosen address, pays the configured price to the deposit account, and
receives a signed bearer token. The gate only ever reads the ledger through
a node's RPC interface; a built-in block-lattice simulator plus mock node
make the whole protocol testable offline.
"""

__version__ = "0.1.0"
