"""Exception hierarchy shared by every simulator module."""


class ArtexError(Exception):
    """Base class for all simulator errors."""


# ledger
class LedgerError(ArtexError):
    pass


class CalledAfterSetup(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class InsufficientGas(InsufficientFunds):
    pass


class NotOwner(LedgerError):
    pass


class IdentityNotRegistered(LedgerError):
    pass


class WrongStandard(LedgerError):
    pass


class UnknownContract(LedgerError):
    pass


class UnknownAddress(LedgerError):
    pass


class BadSignature(LedgerError):
    pass


# identity / authorization
class NotAuthorized(ArtexError):
    pass


class DuplicateId(ArtexError):
    pass


class BadCredentials(ArtexError):
    pass


class InvalidSession(ArtexError):
    pass


class MemberNotFull(ArtexError):
    pass


# exchange
class ExchangeError(ArtexError):
    pass


class IllegalTransition(ExchangeError):
    pass


class MissingDisclosure(ExchangeError):
    pass


class DepositMismatch(ExchangeError):
    pass


class DepositTimeout(ExchangeError):
    pass


class NoWinner(ExchangeError):
    pass


class UnknownListing(ExchangeError):
    pass


# auction
class AuctionError(ArtexError):
    pass


class WrongState(AuctionError):
    pass


class AuctionClosed(AuctionError):
    pass


class BidTooLow(AuctionError):
    """Raised for a rejected bid. Carries no amount on purpose."""


class NotYetClosable(AuctionError):
    pass


# settlement
class SettlementError(ArtexError):
    pass


class NotWinner(SettlementError):
    pass


class NotSeller(SettlementError):
    pass


class SumMismatch(SettlementError):
    pass


class UnknownDestination(SettlementError):
    pass


class EmptyWalletSet(SettlementError):
    pass


class TreasuryInsufficient(SettlementError):
    pass


class DeliveryFailed(SettlementError):
    pass


class NoRecord(SettlementError):
    pass


# adversary
class UnknownToken(ArtexError):
    pass


class SearchBudgetExceeded(ArtexError):
    pass


# harness
class ConfigInvalid(ArtexError):
    pass


class ScenarioAborted(ArtexError):
    def __init__(self, trade_id: str, reason: str):
        super().__init__(f"trade {trade_id}: {reason}")
        self.trade_id = trade_id
        self.reason = reason


class InsufficientFunding(ArtexError):
    pass
