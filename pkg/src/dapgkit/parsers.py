#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Implements parsers for the configuration and feature-table files."""

import pathlib
import re
from typing import Dict, Tuple, Any

import attr
import numpy as np
from attr.validators import instance_of
from pyparsing import pyparsing_common, ParserElement, Group, CaselessKeyword, Word, Literal, QuotedString, \
    Suppress, ZeroOrMore, OneOrMore, Regex, alphas, alphanums, DelimitedList, ParseException, StringEnd

from .exceptions import FormatError


@attr.s
class ConfigParser(object):
    """
    Parse flat configuration files
    ------------------------------
    One assignment per line; '#' starts a comment; blank lines are ignored.
    line        ::= key "=" value
    key         ::= IDENT ("." IDENT)+
    value       ::= "()" | scalar ("," scalar)*
    scalar      ::= NUMBER | "true" | "false" | QUOTED_STRING | WORD
    """
    line_grammar = attr.ib(validator=instance_of(ParserElement))

    comment_character = "#"

    @classmethod
    def create(cls):
        """
        Create a configuration parser.

        :return:
        """
        identifier = Word(alphas + "_", alphanums + "_")
        key = (identifier + ZeroOrMore(Literal(".") + identifier)).set_parse_action(lambda t: "".join(t))

        true = CaselessKeyword("true").set_parse_action(lambda t: True)
        false = CaselessKeyword("false").set_parse_action(lambda t: False)
        quoted = QuotedString('"', esc_char="\\")
        number = pyparsing_common.number()
        word = Word(alphanums + "_-./:")
        scalar = number | true | false | quoted | word

        empty = Literal("()").set_parse_action(lambda t: tuple())
        listing = DelimitedList(scalar).set_parse_action(lambda t: t[0] if len(t) == 1 else tuple(t))
        value = empty | listing

        line_grammar = key("key") + Suppress("=") + Group(value)("value") + StringEnd()

        return cls(line_grammar)

    def parse(self, text: str) -> Dict[str, Tuple[Any, int]]:
        """
        Parse configuration text into a mapping of dotted keys to (value, line number).

        :param text:
        :return:
        """
        entries = dict()
        for i, raw_line in enumerate(text.splitlines(), start=1):
            line = self._strip_comment(raw_line)
            if not line:
                continue
            try:
                tokens = self.line_grammar.parse_string(line, parse_all=True)
            except ParseException as e:
                raise FormatError("cannot parse '{}' ({})".format(line, e.msg), line=i)
            key = tokens["key"]
            if key.count(".") == 0:
                raise FormatError("the key '{}' is not of the form section.field".format(key), line=i)
            if key in entries:
                raise FormatError("duplicate key '{}'".format(key), line=i)
            entries[key] = (tokens["value"][0], i)
        return entries

    def load(self, path) -> Dict[str, Tuple[Any, int]]:
        """
        Load and parse a configuration file.

        :param path:
        :return:
        """
        with pathlib.Path(path).open("r") as f:
            return self.parse(f.read())

    def _strip_comment(self, raw_line: str) -> str:
        """
        Remove a trailing comment; '#' inside a quoted string is kept.
        """
        in_quotes = False
        escaped = False
        for i, c in enumerate(raw_line):
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_quotes = not in_quotes
            elif c == self.comment_character and not in_quotes:
                return raw_line[:i].strip()
        return raw_line.strip()


@attr.s(frozen=True)
class FeatureTable(object):
    feature_dim = attr.ib(converter=int)
    rows = attr.ib(validator=instance_of(dict), repr=False, eq=False)
    metadata = attr.ib(default=attr.Factory(dict), validator=instance_of(dict))


@attr.s
class FeatureTableParser(object):
    """
    Parse feature tables
    --------------------
    header      ::= "feature_dim" "=" INT (IDENT "=" VALUE)*
    row         ::= INT "," INT ("," REAL) * feature_dim
    Rows are keyed by "episode:step".
    """
    header_grammar = attr.ib(validator=instance_of(ParserElement))
    row_grammar = attr.ib(validator=instance_of(ParserElement))

    dim_keyword = "feature_dim"

    @classmethod
    def create(cls):
        """
        Create a feature table parser.

        :return:
        """
        integer = pyparsing_common.integer()
        identifier = Word(alphas + "_", alphanums + "_")
        meta_value = Word(alphanums + "_-./:")
        dim = Suppress(CaselessKeyword(cls.dim_keyword)) + Suppress("=") + integer("feature_dim")
        meta = Group(identifier + Suppress("=") + meta_value)
        header_grammar = dim + Group(ZeroOrMore(meta))("metadata") + StringEnd()

        index = pyparsing_common.signed_integer()
        real = Regex(r"[+-]?(?:(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf(?:inity)?|nan)", flags=re.IGNORECASE)
        real.set_parse_action(lambda t: float(t[0]))
        row_grammar = index("episode") + Suppress(",") + index("step") + \
            Group(OneOrMore(Suppress(",") + real))("vector") + StringEnd()

        return cls(header_grammar, row_grammar)

    def parse(self, text: str) -> FeatureTable:
        """
        Parse the text of a feature table.

        :param text:
        :return:
        """
        lines = text.splitlines()
        if not lines:
            raise FormatError("the feature table is empty", line=1)
        try:
            header = self.header_grammar.parse_string(lines[0].strip(), parse_all=True)
        except ParseException as e:
            raise FormatError("malformed header ({})".format(e.msg), line=1)
        feature_dim = int(header["feature_dim"])
        if feature_dim < 1:
            raise FormatError("feature_dim must be positive", line=1)
        metadata = {k: v for k, v in header["metadata"]}

        rows = dict()
        for i, line in enumerate(lines[1:], start=2):
            line = line.strip()
            if not line:
                continue
            try:
                tokens = self.row_grammar.parse_string(line, parse_all=True)
            except ParseException as e:
                raise FormatError("malformed row '{}' ({})".format(line, e.msg), line=i)
            vector = np.array(tokens["vector"].as_list(), dtype=np.float64)
            if vector.shape[0] != feature_dim:
                raise FormatError("expected {} features, got {}".format(feature_dim, vector.shape[0]), line=i)
            if not np.all(np.isfinite(vector)):
                raise FormatError("non-finite feature value", line=i)
            key = "{}:{}".format(tokens["episode"], tokens["step"])
            if key in rows:
                raise FormatError("duplicate frame key '{}'".format(key), line=i)
            vector.flags.writeable = False
            rows[key] = vector

        return FeatureTable(feature_dim, rows, metadata)

    def load(self, path) -> FeatureTable:
        """
        Load and parse a feature table file.

        :param path:
        :return:
        """
        with pathlib.Path(path).open("r") as f:
            return self.parse(f.read())
