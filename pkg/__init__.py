__version__ = '0.1.0'
__author__ = 'lithic'  # 区分度图像描述评测
