"""
工具模块，负责数据读写、异常定义、进度输出和评测报告
"""
