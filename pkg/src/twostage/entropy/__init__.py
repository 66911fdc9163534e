"""Context-adaptive binary arithmetic coding of block syntax."""
from .engine import ArithmeticDecoder, ArithmeticEncoder, ContextTable, StreamError
from .syntax import (decode_levels, decode_mean, decode_orders, decode_significance_map,
                     decode_stage2_coeffs, encode_levels, encode_mean, encode_orders,
                     encode_significance_map, encode_stage2_coeffs, chosen_from_orders,
                     orders_from_chosen, significance_map, plane_ones, order_width)

__all__ = [
    "ArithmeticDecoder", "ArithmeticEncoder", "ContextTable", "StreamError",
    "encode_significance_map", "decode_significance_map", "encode_orders", "decode_orders",
    "encode_levels", "decode_levels", "encode_stage2_coeffs", "decode_stage2_coeffs",
    "encode_mean", "decode_mean", "significance_map", "orders_from_chosen",
    "chosen_from_orders", "plane_ones", "order_width",
]
