"""Initiator-side helpers: performing external calls before submission."""

import logging
from typing import Sequence

from ..clients.oracle import ExcallPort
from ..core.digests import initiator_nonce
from ..core.types import CallMode, Transaction, VerifiableExternalCall
from ..vm.machine import resolve_uri
from ..vm.opcodes import Op
from ..vm.program import ContractProgram

logger = logging.getLogger(__name__)


def excall_templates(program: ContractProgram) -> list[str]:
    """URI templates of a program's EXCALL instructions, in code order."""
    return [
        ins.arg for _, ins in sorted(program.instructions.items()) if ins.op is Op.EXCALL
    ]


def attach_calls(
    sender: bytes,
    account_nonce: int,
    target: bytes,
    data: bytes,
    templates: Sequence[str],
    port: ExcallPort,
    timeout: float = 2.0,
) -> Transaction:
    """
    Perform the calls a transaction will make and attach them to it.

    Each call is bound to the sender, the account nonce and its position, so
    the attached results cannot be reused by another transaction.

    Raises:
        ExcallTransportError: If any call gets no usable response.
    """
    calls = []
    for index, template in enumerate(templates):
        nonce = initiator_nonce(sender, account_nonce, index)
        uri = resolve_uri(template, nonce)
        envelope = port.fetch(uri, timeout)
        logger.debug("attached call %d for nonce %d: %s", index, account_nonce, uri)
        calls.append(VerifiableExternalCall(
            request_uri=uri,
            request_nonce=nonce,
            public_key=envelope.public_key,
            response=envelope.response,
            signature=envelope.signature,
        ))
    return Transaction(
        sender=sender,
        account_nonce=account_nonce,
        target=target,
        input=data,
        excalls=tuple(calls),
        mode=CallMode.INITIATOR_ATTACHED,
    )
